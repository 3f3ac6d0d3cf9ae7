/** Dashboard state and transitions. Pure bookkeeping: every number shown
 * comes from a server payload; the console does no detection math. */

import { ApiClient, ConfigRejected } from './api.js';
import type {
  ConfigEnvelope,
  Diagnostics,
  OscillationEvent,
  StatusMessage,
  StreamMessage,
} from './types.js';

export const MAX_EVENTS = 200;
const DEBOUNCE_MS = 250;

export interface ViewState {
  connection: 'connecting' | 'live' | 'lost';
  config: ConfigEnvelope | null;
  /** Field edits typed locally but not yet acknowledged by the server. */
  draft: Record<string, number | [number, number]>;
  configDiagnostics: Diagnostics | null;
  events: OscillationEvent[];
  selectedEventId: number | null;
  lastStatus: StatusMessage | null;
  gapNotice: boolean;
}

export type Listener = (state: ViewState) => void;

export class DashboardViewModel {
  private state: ViewState = {
    connection: 'connecting',
    config: null,
    draft: {},
    configDiagnostics: null,
    events: [],
    selectedEventId: null,
    lastStatus: null,
    gapNotice: false,
  };

  private listeners: Listener[] = [];
  private debounceHandle: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private api: ApiClient,
    private scheduler: typeof setTimeout = setTimeout,
    private canceler: typeof clearTimeout = clearTimeout,
  ) {}

  snapshot(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  // -- bootstrap / connection ----------------------------------------------

  async loadConfig(): Promise<void> {
    const config = await this.api.getConfig();
    this.update({ config, configDiagnostics: null });
  }

  setConnection(live: boolean): void {
    this.update({ connection: live ? 'live' : 'lost' });
  }

  // -- stream ---------------------------------------------------------------

  applyStreamMessage(message: StreamMessage): void {
    if (message.type === 'status') {
      this.update({ lastStatus: message });
    } else if (message.type === 'event') {
      this.ingestEvents([message.event]);
    } else if (message.type === 'gap') {
      this.update({ gapNotice: true });
    }
  }

  private ingestEvents(incoming: OscillationEvent[]): void {
    const byId = new Map<number, OscillationEvent>();
    for (const event of this.state.events) byId.set(event.event_id, event);
    for (const event of incoming) byId.set(event.event_id, event);
    const events = [...byId.values()]
      .sort((a, b) => b.event_id - a.event_id)
      .slice(0, MAX_EVENTS);
    let selected = this.state.selectedEventId;
    if (selected === null && events.length > 0) selected = events[0].event_id;
    this.update({ events, selectedEventId: selected });
  }

  selectEvent(eventId: number): void {
    if (this.state.events.some((e) => e.event_id === eventId)) {
      this.update({ selectedEventId: eventId });
    }
  }

  selectedEvent(): OscillationEvent | null {
    return (
      this.state.events.find((e) => e.event_id === this.state.selectedEventId) ??
      null
    );
  }

  /** One-click backfill after a gap notice: pull everything newer than the
   * oldest record we kept and merge by event id. */
  async backfill(): Promise<void> {
    const oldest = this.state.events.length
      ? Math.min(...this.state.events.map((e) => e.detected_at))
      : 0;
    const recovered = await this.api.history(oldest, 2 ** 60);
    this.ingestEvents(recovered);
    this.update({ gapNotice: false });
  }

  // -- config editing ---------------------------------------------------------

  /** Record a control edit; the PUT is debounced so slider drags coalesce. */
  editConfig(field: string, value: number | [number, number]): void {
    const draft = { ...this.state.draft, [field]: value };
    this.update({ draft, configDiagnostics: null });
    if (this.debounceHandle !== null) this.canceler(this.debounceHandle);
    this.debounceHandle = this.scheduler(() => {
      this.debounceHandle = null;
      void this.flushEdits();
    }, DEBOUNCE_MS);
  }

  /** Send pending edits now (also called by the debounce timer). */
  async flushEdits(): Promise<void> {
    const edits = this.state.draft;
    if (Object.keys(edits).length === 0) return;
    try {
      const config = await this.api.putConfig(edits);
      this.update({ config, draft: {}, configDiagnostics: null });
    } catch (error) {
      if (error instanceof ConfigRejected) {
        // Revert the controls to the acknowledged config and surface the
        // field diagnostics.
        this.update({ draft: {}, configDiagnostics: error.diagnostics });
      } else {
        this.update({ draft: {}, connection: 'lost' });
      }
    }
  }

  /** Value a control should display: local draft if present, else pending
   * (marked), else active. */
  displayedValue(field: keyof ConfigEnvelope['active']): {
    value: number | [number, number] | null;
    origin: 'draft' | 'pending' | 'active' | 'none';
  } {
    if (field in this.state.draft) {
      return { value: this.state.draft[field as string], origin: 'draft' };
    }
    const config = this.state.config;
    if (!config) return { value: null, origin: 'none' };
    if (config.pending && config.pending[field] !== config.active[field]) {
      return { value: config.pending[field], origin: 'pending' };
    }
    return { value: config.active[field], origin: 'active' };
  }
}
