/** DOM wiring: a config panel whose controls follow the acknowledged
 * server config (pending edits are explicitly marked), a live event table,
 * a channel-status strip, and the mode-shape polar plot. */

import { MODE_COLORS, polarLayout } from './polar.js';
import type { DashboardViewModel, ViewState } from './viewmodel.js';
import type { OscillationEvent } from './types.js';

const NUMERIC_FIELDS: {
  field: string;
  label: string;
  min: number;
  max: number;
  step: number;
}[] = [
  { field: 'sensitivity', label: 'frequency sensitivity', min: 0.005, max: 0.2, step: 0.005 },
  { field: 'amplitude_threshold', label: 'amplitude threshold', min: 0, max: 2, step: 0.05 },
  { field: 'damping_ratio_alarm', label: 'damping threshold', min: 0, max: 0.5, step: 0.01 },
  { field: 'ts_filter_depth', label: 'filter depth (windows)', min: 1, max: 6, step: 1 },
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function formatTime(ms: number): string {
  return new Date(ms).toISOString().replace('T', ' ').slice(0, 19);
}

export function classificationLabel(value: string): string {
  return value === 'local' ? 'Local Oscillation' : 'Inter-area Oscillation';
}

export class DashboardApp {
  readonly banner: HTMLDivElement;
  readonly configPanel: HTMLDivElement;
  readonly statusStrip: HTMLDivElement;
  readonly gapNotice: HTMLDivElement;
  readonly eventTable: HTMLTableElement;
  readonly polarView: HTMLDivElement;
  private sliders = new Map<string, HTMLInputElement>();
  private numbers = new Map<string, HTMLInputElement>();
  private bandInputs: [HTMLInputElement, HTMLInputElement];
  private bandError: HTMLSpanElement;
  private diagnosticsBox: HTMLDivElement;

  constructor(private root: HTMLElement, private vm: DashboardViewModel) {
    this.banner = el('div', 'banner hidden');
    this.banner.textContent = 'connection lost - reconnecting';
    this.configPanel = el('div', 'config-panel');
    this.statusStrip = el('div', 'status-strip');
    this.gapNotice = el('div', 'gap-notice hidden');
    this.eventTable = el('table', 'event-table');
    this.polarView = el('div', 'polar-view');

    this.bandError = el('span', 'field-error hidden');
    this.diagnosticsBox = el('div', 'diagnostics hidden');
    this.bandInputs = [el('input'), el('input')];
    this.buildConfigPanel();

    const gapText = el('span', undefined, 'events missed, see history ');
    const backfillButton = el('button', 'backfill', 'backfill');
    backfillButton.addEventListener('click', () => void this.vm.backfill());
    this.gapNotice.append(gapText, backfillButton);

    root.append(
      this.banner,
      this.configPanel,
      this.statusStrip,
      this.gapNotice,
      this.eventTable,
      this.polarView,
    );
    vm.subscribe((state) => this.sync(state));
    this.sync(vm.snapshot());
  }

  private buildConfigPanel(): void {
    const title = el('h2', undefined, 'detector configuration');
    this.configPanel.append(title);
    for (const spec of NUMERIC_FIELDS) {
      const row = el('div', 'config-row');
      row.append(el('label', undefined, spec.label));
      const slider = el('input');
      slider.type = 'range';
      slider.min = String(spec.min);
      slider.max = String(spec.max);
      slider.step = String(spec.step);
      slider.dataset.field = spec.field;
      const number = el('input');
      number.type = 'number';
      number.min = String(spec.min);
      number.max = String(spec.max);
      number.step = String(spec.step);
      number.dataset.field = spec.field;
      const onEdit = (raw: string) => {
        const value = Number(raw);
        if (!Number.isFinite(value)) return;
        this.vm.editConfig(
          spec.field,
          spec.field === 'ts_filter_depth' ? Math.round(value) : value,
        );
      };
      slider.addEventListener('input', () => onEdit(slider.value));
      number.addEventListener('change', () => onEdit(number.value));
      const marker = el('span', 'pending-marker hidden', 'pending');
      marker.dataset.field = spec.field;
      row.append(slider, number, marker);
      this.configPanel.append(row);
      this.sliders.set(spec.field, slider);
      this.numbers.set(spec.field, number);
    }

    const bandRow = el('div', 'config-row');
    bandRow.append(el('label', undefined, 'frequency band (Hz)'));
    for (const [index, input] of this.bandInputs.entries()) {
      input.type = 'number';
      input.step = '0.05';
      input.dataset.field = `freq_band_${index === 0 ? 'min' : 'max'}`;
      input.addEventListener('change', () => this.onBandEdit());
      bandRow.append(input);
    }
    bandRow.append(this.bandError);
    this.configPanel.append(bandRow, this.diagnosticsBox);
  }

  private onBandEdit(): void {
    const low = Number(this.bandInputs[0].value);
    const high = Number(this.bandInputs[1].value);
    if (!(low > 0) || !(high > low)) {
      // Invalid band never leaves the browser.
      this.bandError.textContent = 'requires 0 < min < max';
      this.bandError.classList.remove('hidden');
      return;
    }
    this.bandError.classList.add('hidden');
    this.vm.editConfig('freq_band', [low, high]);
  }

  private sync(state: ViewState): void {
    this.banner.classList.toggle('hidden', state.connection !== 'lost');
    const disabled = state.connection === 'lost';
    for (const input of [...this.sliders.values(), ...this.numbers.values(), ...this.bandInputs]) {
      input.disabled = disabled;
    }

    for (const spec of NUMERIC_FIELDS) {
      const shown = this.vm.displayedValue(spec.field as never);
      const slider = this.sliders.get(spec.field)!;
      const number = this.numbers.get(spec.field)!;
      if (shown.value !== null && typeof shown.value === 'number') {
        const text = String(shown.value);
        if (document.activeElement !== slider) slider.value = text;
        if (document.activeElement !== number) number.value = text;
      }
      const marker = this.configPanel.querySelector(
        `.pending-marker[data-field="${spec.field}"]`,
      );
      marker?.classList.toggle('hidden', shown.origin !== 'pending' && shown.origin !== 'draft');
    }
    const band = this.vm.displayedValue('freq_band');
    if (Array.isArray(band.value)) {
      if (document.activeElement !== this.bandInputs[0]) {
        this.bandInputs[0].value = String(band.value[0]);
      }
      if (document.activeElement !== this.bandInputs[1]) {
        this.bandInputs[1].value = String(band.value[1]);
      }
    }

    this.diagnosticsBox.classList.toggle('hidden', !state.configDiagnostics);
    if (state.configDiagnostics) {
      this.diagnosticsBox.textContent = Object.entries(state.configDiagnostics)
        .map(([field, problem]) => `${field}: ${problem}`)
        .join('; ');
    }

    this.renderStatus(state);
    this.gapNotice.classList.toggle('hidden', !state.gapNotice);
    this.renderEvents(state);
    this.renderPolar();
  }

  private renderStatus(state: ViewState): void {
    this.statusStrip.replaceChildren();
    if (!state.lastStatus) {
      this.statusStrip.append(el('span', 'status-chip idle', 'waiting for stream'));
      return;
    }
    const counts = state.lastStatus.quality_counts;
    const total = Object.values(counts).reduce((a, b) => a + b, 0);
    const ok = counts['ok'] ?? 0;
    const healthy = ok === total;
    const chip = el(
      'span',
      `status-chip ${healthy ? 'ok' : 'degraded'}`,
      `stride ${state.lastStatus.stride_index}: ${ok}/${total} channels ok`,
    );
    this.statusStrip.append(chip);
    for (const [quality, count] of Object.entries(counts).sort()) {
      if (quality !== 'ok' && count > 0) {
        this.statusStrip.append(el('span', `status-chip ${quality}`, `${quality}: ${count}`));
      }
    }
  }

  private renderEvents(state: ViewState): void {
    this.eventTable.replaceChildren();
    const head = el('tr');
    for (const column of ['Time', 'Type', 'Frequency(Hz)', 'Channels']) {
      head.append(el('th', undefined, column));
    }
    this.eventTable.append(head);
    for (const event of state.events) {
      for (const mode of event.system_modes) {
        const row = el('tr', 'event-row');
        row.dataset.eventId = String(event.event_id);
        if (event.event_id === state.selectedEventId) row.classList.add('selected');
        row.append(
          el('td', undefined, formatTime(event.detected_at)),
          el('td', undefined, classificationLabel(mode.classification)),
          el('td', undefined, mode.frequency_hz.toFixed(4)),
          el('td', undefined, mode.member_channels.join('; ')),
        );
        row.addEventListener('click', () => this.vm.selectEvent(event.event_id));
        this.eventTable.append(row);
      }
    }
  }

  private renderPolar(): void {
    this.polarView.replaceChildren();
    const event: OscillationEvent | null = this.vm.selectedEvent();
    if (!event) return;
    const layout = polarLayout(event.system_modes.map((m) => m.mode_shape));
    const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
    svg.setAttribute('width', String(layout.size));
    svg.setAttribute('height', String(layout.size));
    svg.setAttribute('class', 'polar-plot');
    const circle = document.createElementNS('http://www.w3.org/2000/svg', 'circle');
    circle.setAttribute('cx', String(layout.center));
    circle.setAttribute('cy', String(layout.center));
    circle.setAttribute('r', String(layout.radius));
    circle.setAttribute('class', 'polar-rim');
    svg.append(circle);
    for (const arrow of layout.arrows) {
      const line = document.createElementNS('http://www.w3.org/2000/svg', 'line');
      line.setAttribute('x1', arrow.x1.toFixed(2));
      line.setAttribute('y1', arrow.y1.toFixed(2));
      line.setAttribute('x2', arrow.x2.toFixed(2));
      line.setAttribute('y2', arrow.y2.toFixed(2));
      line.setAttribute('stroke', arrow.color);
      line.setAttribute('class', 'mode-arrow');
      line.setAttribute('data-channel', arrow.channel);
      svg.append(line);
    }
    this.polarView.append(svg);
    const legend = el('div', 'polar-legend');
    event.system_modes.slice(0, 3).forEach((mode, index) => {
      const item = el(
        'span',
        'legend-item',
        `${mode.frequency_hz.toFixed(4)} Hz (${classificationLabel(mode.classification)})`,
      );
      item.style.color = MODE_COLORS[index % MODE_COLORS.length];
      legend.append(item);
    });
    this.polarView.append(legend);
  }
}
