import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { ApiClient } from '../src/api.js';
import { DashboardViewModel, MAX_EVENTS } from '../src/viewmodel.js';
import { FakeServer, loadLocalModeEvent } from './helpers.js';

function makeVm(server: FakeServer): DashboardViewModel {
  const api = new ApiClient('http://fake', server.fetchLike);
  return new DashboardViewModel(api);
}

describe('config editing', () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it('loads the acknowledged config', async () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    await vm.loadConfig();
    expect(vm.snapshot().config?.active.damping_ratio_alarm).toBe(0.05);
    expect(vm.displayedValue('damping_ratio_alarm')).toEqual({
      value: 0.05,
      origin: 'active',
    });
  });

  it('debounces slider drags into a single request', async () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    await vm.loadConfig();
    vm.editConfig('damping_ratio_alarm', 0.07);
    vm.editConfig('damping_ratio_alarm', 0.09);
    vm.editConfig('damping_ratio_alarm', 0.1);
    expect(server.putCalls).toBe(0);
    expect(vm.displayedValue('damping_ratio_alarm')).toEqual({
      value: 0.1,
      origin: 'draft',
    });
    await vi.runAllTimersAsync();
    expect(server.putCalls).toBe(1);
    expect(server.pending?.damping_ratio_alarm).toBe(0.1);
    // Server acknowledged: the value shows as pending, not draft.
    expect(vm.displayedValue('damping_ratio_alarm')).toEqual({
      value: 0.1,
      origin: 'pending',
    });
  });

  it('applies the pending value from the next stride on', async () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    await vm.loadConfig();
    vm.editConfig('damping_ratio_alarm', 0.1);
    await vi.runAllTimersAsync();
    server.stride();
    await vm.loadConfig();
    expect(vm.snapshot().config?.active.damping_ratio_alarm).toBe(0.1);
    expect(vm.snapshot().config?.pending).toBeNull();
    expect(vm.displayedValue('damping_ratio_alarm').origin).toBe('active');
  });

  it('rejection reverts the control and surfaces field diagnostics', async () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    await vm.loadConfig();
    vm.editConfig('sensitivity', 7);
    await vi.runAllTimersAsync();
    const state = vm.snapshot();
    expect(state.configDiagnostics).toHaveProperty('sensitivity');
    expect(state.draft).toEqual({});
    expect(vm.displayedValue('sensitivity')).toEqual({
      value: 0.03,
      origin: 'active',
    });
    expect(server.pending).toBeNull();
  });

  it('a concurrent edit from another client wins once acknowledged', async () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    await vm.loadConfig();
    // Other client changes the config and a stride promotes it.
    server.pending = { ...server.active, amplitude_threshold: 0.4 };
    server.stride();
    await vm.loadConfig();
    expect(vm.displayedValue('amplitude_threshold')).toEqual({
      value: 0.4,
      origin: 'active',
    });
  });
});

describe('event list', () => {
  it('ingests stream events newest-first and dedupes by id', () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    const base = loadLocalModeEvent();
    vm.applyStreamMessage({ type: 'event', event: { ...base, event_id: 1 } });
    vm.applyStreamMessage({ type: 'event', event: { ...base, event_id: 2 } });
    vm.applyStreamMessage({ type: 'event', event: { ...base, event_id: 1 } });
    const ids = vm.snapshot().events.map((e) => e.event_id);
    expect(ids).toEqual([2, 1]);
  });

  it('bounds the retained event list', () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    const base = loadLocalModeEvent();
    for (let i = 1; i <= MAX_EVENTS + 50; i++) {
      vm.applyStreamMessage({ type: 'event', event: { ...base, event_id: i } });
    }
    expect(vm.snapshot().events).toHaveLength(MAX_EVENTS);
    expect(vm.snapshot().events[0].event_id).toBe(MAX_EVENTS + 50);
  });

  it('selects the first event automatically, then follows clicks', () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    const base = loadLocalModeEvent();
    vm.applyStreamMessage({ type: 'event', event: { ...base, event_id: 5 } });
    expect(vm.selectedEvent()?.event_id).toBe(5);
    vm.applyStreamMessage({ type: 'event', event: { ...base, event_id: 6 } });
    expect(vm.selectedEvent()?.event_id).toBe(5);
    vm.selectEvent(6);
    expect(vm.selectedEvent()?.event_id).toBe(6);
    vm.selectEvent(999); // unknown id ignored
    expect(vm.selectedEvent()?.event_id).toBe(6);
  });

  it('gap notice backfills from history and clears', async () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    const base = loadLocalModeEvent();
    server.history.push({ ...base, event_id: 1, detected_at: 1000 });
    server.history.push({ ...base, event_id: 2, detected_at: 2000 });
    vm.applyStreamMessage({ type: 'event', event: { ...base, event_id: 3, detected_at: 3000 } });
    vm.applyStreamMessage({ type: 'gap' });
    expect(vm.snapshot().gapNotice).toBe(true);
    await vm.backfill();
    expect(vm.snapshot().gapNotice).toBe(false);
    expect(vm.snapshot().events.map((e) => e.event_id)).toEqual([3, 2, 1]);
  });
});

describe('status and connection', () => {
  it('tracks the latest stride status', () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    vm.applyStreamMessage({
      type: 'status',
      stride_index: 4,
      timestamp: 123,
      quality_counts: { ok: 3, stale: 1 },
      event_count: 0,
    });
    expect(vm.snapshot().lastStatus?.stride_index).toBe(4);
    expect(vm.snapshot().lastStatus?.quality_counts['stale']).toBe(1);
  });

  it('flags lost connections', () => {
    const server = new FakeServer();
    const vm = makeVm(server);
    vm.setConnection(true);
    expect(vm.snapshot().connection).toBe('live');
    vm.setConnection(false);
    expect(vm.snapshot().connection).toBe('lost');
  });
});
