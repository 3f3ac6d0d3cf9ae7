import { ApiClient, StreamClient } from './api.js';
import { DashboardApp } from './render.js';
import { DashboardViewModel } from './viewmodel.js';

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get('api');
  return override ?? window.location.origin;
}

function wsUrl(base: string): string {
  return base.replace(/^http/, 'ws') + '/stream';
}

const base = apiBase();
const api = new ApiClient(base);
const vm = new DashboardViewModel(api);
const root = document.getElementById('app');
if (!root) throw new Error('missing #app container');
new DashboardApp(root, vm);

void vm.loadConfig();
const stream = new StreamClient(wsUrl(base), {
  onMessage: (message) => vm.applyStreamMessage(message),
  onConnection: (live) => vm.setConnection(live),
});
stream.start();
