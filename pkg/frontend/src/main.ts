import { Api } from './api.js';
import { SpaceController } from './controller.js';
import { Panel } from './panel.js';
import { Viewer } from './viewer.js';

const SERVICE_URL =
  new URLSearchParams(location.search).get('service') ?? 'http://127.0.0.1:7878';

function banner(message: string, retry: () => void): void {
  const el = document.getElementById('banner')!;
  el.textContent = '';
  el.style.display = 'block';
  el.appendChild(document.createTextNode(message + ' '));
  const btn = document.createElement('button');
  btn.textContent = 'Retry';
  btn.addEventListener('click', () => {
    el.style.display = 'none';
    retry();
  });
  el.appendChild(btn);
}

function toast(message: string): void {
  const el = document.getElementById('toast')!;
  el.textContent = message;
  el.style.display = 'block';
  setTimeout(() => (el.style.display = 'none'), 2500);
}

async function boot(): Promise<void> {
  const api = new Api(SERVICE_URL);
  let viewer: Viewer;
  try {
    const space = await api.space();
    viewer = new Viewer(document.getElementById('view') as HTMLCanvasElement);
    // show the base mesh before the controls go live, so the first slider
    // frame can never be overwritten by a slower initial fetch
    const base = await api.baseMesh();
    viewer.show(base.mesh);
    let panel: Panel | undefined;
    const controller = new SpaceController(api, space, {
      onMesh: (response) => viewer.show(response.mesh),
      onError: (message) => {
        toast(message);
        panel?.sync(); // reflect the reverted state in the inputs
      },
    });
    panel = new Panel(document.getElementById('panel')!, space, controller);
  } catch (err) {
    banner(`Service unreachable at ${SERVICE_URL}: ${err}`, () => void boot());
  }
}

void boot();
