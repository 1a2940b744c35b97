/** Client-side slider state and request scheduling.
 *
 * Invariants enforced here, not in the DOM layer:
 *  - submitted weights are clamped to [0,1] and free targets to [lo,hi],
 *    so the service never sees an out-of-bounds request;
 *  - requests carry monotonically increasing ids and a response is dropped
 *    unless it answers the newest request issued so far (no stale frames);
 *  - a rejected request (4xx) reverts the state to the last acknowledged one.
 */

import {
  ApiError,
  EvalRequest,
  EvalResponse,
  SpaceInfo,
  Transport,
} from './api.js';
import { Debouncer } from './debounce.js';

export const DEBOUNCE_MS = 80;

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

export interface ControllerEvents {
  onMesh(response: EvalResponse, requestId: number): void;
  onError?(message: string): void;
}

interface SliderState {
  weights: Map<string, number>;
  free: number[]; // absolute reduced-coordinate targets
  toggles: Map<string, boolean>;
}

export class SpaceController {
  private state: SliderState;
  private lastGood: SliderState;
  private seq = 0;
  private rendered = 0;
  private inflight = 0;
  private readonly debouncer: Debouncer;

  constructor(
    private readonly transport: Transport,
    readonly space: SpaceInfo,
    private readonly events: ControllerEvents,
    debounceMs: number = DEBOUNCE_MS,
  ) {
    this.state = this.defaultState();
    this.lastGood = this.cloneState(this.state);
    this.debouncer = new Debouncer(debounceMs);
  }

  private defaultState(): SliderState {
    return {
      weights: new Map(this.space.variations.map((l) => [l, 0])),
      free: this.space.free.map((f) => f.base),
      toggles: new Map(this.space.groups.map((g) => [g.name, true])),
    };
  }

  private cloneState(s: SliderState): SliderState {
    return {
      weights: new Map(s.weights),
      free: s.free.slice(),
      toggles: new Map(s.toggles),
    };
  }

  get latestRequestId(): number {
    return this.seq;
  }

  get lastRenderedId(): number {
    return this.rendered;
  }

  get pendingRequests(): number {
    return this.inflight;
  }

  setWeight(label: string, value: number): void {
    if (!this.state.weights.has(label)) throw new Error(`unknown variation ${label}`);
    this.state.weights.set(label, clamp(value, 0, 1));
    this.schedule();
  }

  setFree(index: number, value: number): void {
    const f = this.space.free[index];
    if (!f) throw new Error(`unknown free variable ${index}`);
    this.state.free[index] = clamp(value, f.lo, f.hi);
    this.schedule();
  }

  setToggle(name: string, on: boolean): void {
    if (!this.state.toggles.has(name)) throw new Error(`unknown group ${name}`);
    this.state.toggles.set(name, on);
    this.schedule();
  }

  reset(): void {
    this.state = this.defaultState();
    this.schedule();
  }

  weight(label: string): number {
    return this.state.weights.get(label) ?? 0;
  }

  freeValue(index: number): number {
    return this.state.free[index];
  }

  toggle(name: string): boolean {
    return this.state.toggles.get(name) ?? true;
  }

  /** Request body for the current state; offsets are relative to the base
   * reduced coordinates, matching the service contract. */
  requestBody(): EvalRequest {
    const weights: Record<string, number> = {};
    for (const [label, w] of this.state.weights) {
      if (w !== 0) weights[label] = w;
    }
    const toggles: Record<string, boolean> = {};
    for (const [name, on] of this.state.toggles) {
      if (!on) toggles[name] = false;
    }
    return {
      weights,
      offsets: this.state.free.map((v, j) => v - this.space.free[j].base),
      toggles,
    };
  }

  /** Force the pending (or current) state out now, bypassing the debounce;
   * resolves when this submission settles. */
  async flush(): Promise<void> {
    this.debouncer.cancel();
    await this.submit();
  }

  private schedule(): void {
    this.debouncer.trigger(() => void this.submit());
  }

  private async submit(): Promise<void> {
    const id = ++this.seq;
    const body = this.requestBody();
    const snapshot = this.cloneState(this.state);
    this.inflight++;
    try {
      const response = await this.transport.evaluate(body);
      if (id !== this.seq || id <= this.rendered) return; // stale, drop
      this.rendered = id;
      this.lastGood = snapshot;
      this.events.onMesh(response, id);
    } catch (err) {
      if (err instanceof ApiError && err.status >= 400 && err.status < 500) {
        this.state = this.cloneState(this.lastGood);
        this.events.onError?.(`request rejected (${err.status}): ${err.message}`);
      } else {
        this.events.onError?.(String(err));
      }
    } finally {
      this.inflight--;
    }
  }
}
