/** Test doubles mirroring the detection service's wire behavior: pending
 * config promoted at stride boundaries, 422 diagnostics for invalid
 * updates, stream messages pushed over a fake socket. */

import { readFileSync } from 'node:fs';
import { join, dirname } from 'node:path';
import { fileURLToPath } from 'node:url';

import type { SocketLike } from '../src/api.js';
import type {
  ConfigEnvelope,
  DetectorConfig,
  OscillationEvent,
  StreamMessage,
} from '../src/types.js';

const here = dirname(fileURLToPath(import.meta.url));

/** A real event record produced by the detection pipeline on the 13-channel
 * local-mode benchmark case (wire-format fidelity). */
export function loadLocalModeEvent(): OscillationEvent {
  const line = readFileSync(
    join(here, '..', 'fixtures', 'local_1p4_event.jsonl'),
    'utf-8',
  )
    .trim()
    .split('\n')[0];
  return JSON.parse(line) as OscillationEvent;
}

export const DEFAULT_CONFIG: DetectorConfig = {
  freq_band: [0.1, 2.5],
  sensitivity: 0.03,
  amplitude_threshold: 0.2,
  damping_ratio_alarm: 0.05,
  ts_filter_depth: 2,
  window_seconds: 5.0,
  stride_seconds: 1.0,
};

export class FakeSocket implements SocketLike {
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onopen: (() => void) | null = null;
  closed = false;

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  serverPush(message: StreamMessage): void {
    this.onmessage?.({ data: JSON.stringify(message) });
  }

  serverOpen(): void {
    this.onopen?.();
  }

  serverDrop(): void {
    this.onclose?.();
  }
}

function validate(config: DetectorConfig): Record<string, string> {
  const problems: Record<string, string> = {};
  const [lo, hi] = config.freq_band;
  if (!(lo > 0 && lo < hi)) problems['freq_band'] = 'requires 0 < f_min < f_max';
  if (!(config.sensitivity > 0 && config.sensitivity <= 1)) {
    problems['sensitivity'] = 'must be in (0, 1]';
  }
  if (!(config.amplitude_threshold >= 0)) {
    problems['amplitude_threshold'] = 'must be >= 0';
  }
  if (!(Number.isInteger(config.ts_filter_depth) && config.ts_filter_depth >= 1)) {
    problems['ts_filter_depth'] = 'must be an integer >= 1';
  }
  return problems;
}

/** Replay server double: detection rules reduced to the one that matters
 * for the operator loop (a mode alarms when its damping ratio sits below
 * the configured alarm threshold). */
export class FakeServer {
  active: DetectorConfig = { ...DEFAULT_CONFIG };
  pending: DetectorConfig | null = null;
  version = 1;
  sockets: FakeSocket[] = [];
  history: OscillationEvent[] = [];
  putCalls = 0;
  private strideIndex = 0;
  private nextEventId = 1;

  constructor(
    /** damping ratio of the replayed mode; an event fires on a stride iff
     * it is below the active alarm threshold. */
    private replayedModeZeta: number | null = null,
    private template: OscillationEvent | null = null,
  ) {}

  envelope(): ConfigEnvelope {
    return { active: this.active, pending: this.pending, version: this.version };
  }

  fetchLike = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, 'http://fake');
    if (url.pathname === '/config' && (!init || !init.method || init.method === 'GET')) {
      return jsonResponse(200, this.envelope());
    }
    if (url.pathname === '/config' && init?.method === 'PUT') {
      this.putCalls += 1;
      const updates = JSON.parse(String(init.body)) as Partial<DetectorConfig>;
      const base = this.pending ?? this.active;
      const merged = { ...base, ...updates } as DetectorConfig;
      const problems = validate(merged);
      if (Object.keys(problems).length > 0) {
        return jsonResponse(422, { diagnostics: problems });
      }
      this.pending = merged;
      return jsonResponse(200, this.envelope());
    }
    if (url.pathname === '/history') {
      const from = Number(url.searchParams.get('from') ?? 0);
      const to = Number(url.searchParams.get('to') ?? Number.MAX_SAFE_INTEGER);
      const events = this.history.filter(
        (e) => e.detected_at >= from && e.detected_at <= to,
      );
      return jsonResponse(200, { events });
    }
    return jsonResponse(404, {});
  };

  socketFactory = (_url: string): SocketLike => {
    const socket = new FakeSocket();
    this.sockets.push(socket);
    queueMicrotask(() => socket.serverOpen());
    return socket;
  };

  private broadcast(message: StreamMessage): void {
    for (const socket of this.sockets) {
      if (!socket.closed) socket.serverPush(message);
    }
  }

  /** One stride: promote pending config, run the reduced detection rule,
   * push event (if any) and status, exactly like the real runner. */
  stride(): void {
    if (this.pending) {
      this.active = this.pending;
      this.pending = null;
      this.version += 1;
    }
    this.strideIndex += 1;
    let fired = 0;
    if (
      this.replayedModeZeta !== null &&
      this.replayedModeZeta < this.active.damping_ratio_alarm
    ) {
      const base = this.template ?? loadLocalModeEvent();
      const event: OscillationEvent = {
        ...base,
        event_id: this.nextEventId++,
        detected_at: 1_700_000_000_000 + this.strideIndex * 1000,
      };
      this.history.push(event);
      this.broadcast({ type: 'event', event });
      fired = 1;
    }
    this.broadcast({
      type: 'status',
      stride_index: this.strideIndex,
      timestamp: 1_700_000_000_000 + this.strideIndex * 1000,
      quality_counts: { ok: 4 },
      event_count: fired,
    });
  }
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}
