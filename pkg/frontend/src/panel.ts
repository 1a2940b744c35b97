/** Metadata-driven control panel: one slider per variation weight, one per
 * free variable (absolute bounds), one checkbox per discrete group. */

import { SpaceInfo } from './api.js';
import { SpaceController } from './controller.js';

const FREE_STEPS = 1000;

function section(root: HTMLElement, title: string): HTMLElement {
  const box = document.createElement('div');
  box.className = 'panel-section';
  const h = document.createElement('h3');
  h.textContent = title;
  box.appendChild(h);
  root.appendChild(box);
  return box;
}

function sliderRow(
  parent: HTMLElement,
  label: string,
  min: number,
  max: number,
  step: number,
  value: number,
  onInput: (v: number) => void,
): HTMLInputElement {
  const row = document.createElement('label');
  row.className = 'slider-row';
  const span = document.createElement('span');
  span.textContent = label;
  const input = document.createElement('input');
  input.type = 'range';
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  input.value = String(value);
  input.addEventListener('input', () => onInput(Number(input.value)));
  row.appendChild(span);
  row.appendChild(input);
  parent.appendChild(row);
  return input;
}

export class Panel {
  private weightInputs = new Map<string, HTMLInputElement>();
  private freeInputs: HTMLInputElement[] = [];
  private toggleInputs = new Map<string, HTMLInputElement>();

  constructor(
    root: HTMLElement,
    space: SpaceInfo,
    private readonly controller: SpaceController,
  ) {
    root.textContent = '';

    const vars = section(root, 'Variations');
    for (const label of space.variations) {
      this.weightInputs.set(
        label,
        sliderRow(vars, label, 0, 1, 0.01, 0, (v) => controller.setWeight(label, v)),
      );
    }

    const free = section(root, 'Free variables');
    space.free.forEach((f, j) => {
      const step = (f.hi - f.lo) / FREE_STEPS || 1e-6;
      this.freeInputs.push(
        sliderRow(free, f.name, f.lo, f.hi, step, f.base, (v) =>
          controller.setFree(j, v),
        ),
      );
    });

    if (space.groups.length) {
      const groups = section(root, 'Parts');
      for (const g of space.groups) {
        const row = document.createElement('label');
        row.className = 'toggle-row';
        const input = document.createElement('input');
        input.type = 'checkbox';
        input.checked = g.default_on;
        input.addEventListener('change', () =>
          controller.setToggle(g.name, input.checked),
        );
        const span = document.createElement('span');
        span.textContent = g.name;
        row.appendChild(input);
        row.appendChild(span);
        groups.appendChild(row);
        this.toggleInputs.set(g.name, input);
      }
    }

    const reset = document.createElement('button');
    reset.textContent = 'Reset';
    reset.addEventListener('click', () => {
      controller.reset();
      this.sync();
    });
    root.appendChild(reset);
  }

  /** Pull the controller's (clamped / reverted) state back into the inputs. */
  sync(): void {
    for (const [label, input] of this.weightInputs) {
      input.value = String(this.controller.weight(label));
    }
    this.freeInputs.forEach((input, j) => {
      input.value = String(this.controller.freeValue(j));
    });
    for (const [name, input] of this.toggleInputs) {
      input.checked = this.controller.toggle(name);
    }
  }
}
