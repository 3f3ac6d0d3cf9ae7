/** Wire types mirroring the detection service exactly. The console never
 * computes detection quantities; everything displayed comes from these. */

export interface DetectorConfig {
  freq_band: [number, number];
  sensitivity: number;
  amplitude_threshold: number;
  damping_ratio_alarm: number;
  ts_filter_depth: number;
  window_seconds: number;
  stride_seconds: number;
}

export interface ConfigEnvelope {
  active: DetectorConfig;
  pending: DetectorConfig | null;
  version: number;
}

/** channel id -> [normalized amplitude, phase in radians] */
export type ModeShape = Record<string, [number, number]>;

export interface SystemMode {
  frequency_hz: number;
  damping_ratio: number;
  classification: 'local' | 'inter_area';
  member_channels: string[];
  mode_shape: ModeShape;
}

export interface OscillationEvent {
  event_id: number;
  detected_at: number;
  system_modes: SystemMode[];
  detectors_run: Record<string, number>;
  config_hash: string;
}

export interface StatusMessage {
  type: 'status';
  stride_index: number;
  timestamp: number;
  quality_counts: Record<string, number>;
  event_count: number;
}

export interface EventMessage {
  type: 'event';
  event: OscillationEvent;
}

export interface GapMessage {
  type: 'gap';
}

export type StreamMessage = StatusMessage | EventMessage | GapMessage;

export type Diagnostics = Record<string, string>;
