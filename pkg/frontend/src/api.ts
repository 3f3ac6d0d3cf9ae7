/** Thin client for the detection service: REST for config/history, a
 * reconnecting WebSocket for the live stream. Transport factories are
 * injectable so tests can substitute fakes. */

import type { ConfigEnvelope, Diagnostics, OscillationEvent, StreamMessage } from './types.js';

export class ConfigRejected extends Error {
  constructor(public diagnostics: Diagnostics) {
    super('config update rejected');
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async getConfig(): Promise<ConfigEnvelope> {
    const response = await this.fetchFn(`${this.baseUrl}/config`);
    if (!response.ok) throw new Error(`GET /config failed: ${response.status}`);
    return (await response.json()) as ConfigEnvelope;
  }

  async putConfig(updates: Record<string, unknown>): Promise<ConfigEnvelope> {
    const response = await this.fetchFn(`${this.baseUrl}/config`, {
      method: 'PUT',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(updates),
    });
    if (response.status === 422) {
      const body = (await response.json()) as { diagnostics: Diagnostics };
      throw new ConfigRejected(body.diagnostics);
    }
    if (!response.ok) throw new Error(`PUT /config failed: ${response.status}`);
    return (await response.json()) as ConfigEnvelope;
  }

  async history(fromMs: number, toMs: number): Promise<OscillationEvent[]> {
    const response = await this.fetchFn(
      `${this.baseUrl}/history?from=${fromMs}&to=${toMs}`,
    );
    if (!response.ok) throw new Error(`GET /history failed: ${response.status}`);
    const body = (await response.json()) as { events: OscillationEvent[] };
    return body.events;
  }
}

export interface SocketLike {
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface StreamHandlers {
  onMessage: (message: StreamMessage) => void;
  onConnection: (live: boolean) => void;
}

/** Reconnects with a fixed backoff; the server is the only authority, so a
 * reconnect simply resumes (missed records surface as a gap + backfill). */
export class StreamClient {
  private socket: SocketLike | null = null;
  private stopped = false;

  constructor(
    private url: string,
    private handlers: StreamHandlers,
    private socketFactory: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike,
    private reconnectDelayMs = 1000,
    private scheduler: (fn: () => void, ms: number) => unknown = setTimeout,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
    this.socket = null;
  }

  private connect(): void {
    if (this.stopped) return;
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => this.handlers.onConnection(true);
    socket.onmessage = (event) => {
      this.handlers.onMessage(JSON.parse(event.data) as StreamMessage);
    };
    socket.onclose = () => {
      this.handlers.onConnection(false);
      if (!this.stopped) {
        this.scheduler(() => this.connect(), this.reconnectDelayMs);
      }
    };
  }
}
