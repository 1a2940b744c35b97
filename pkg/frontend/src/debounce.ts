/** Trailing-edge debouncer; a flush() forces the pending call immediately
 * (used for slider release and programmatic state pushes). */
export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | undefined;
  private pending: (() => void) | undefined;

  constructor(private readonly delayMs: number) {}

  trigger(fn: () => void): void {
    this.pending = fn;
    if (this.timer !== undefined) clearTimeout(this.timer);
    this.timer = setTimeout(() => this.fire(), this.delayMs);
  }

  flush(): void {
    if (this.pending !== undefined) this.fire();
  }

  cancel(): void {
    if (this.timer !== undefined) clearTimeout(this.timer);
    this.timer = undefined;
    this.pending = undefined;
  }

  private fire(): void {
    const fn = this.pending;
    this.cancel();
    if (fn) fn();
  }
}
