// Undo/redo as a pure stack over immutable snapshots. The stack never
// mutates the states it holds; callers treat drafts as frozen values.

export class UndoStack<T> {
  private past: T[] = [];
  private future: T[] = [];

  constructor(private current: T) {}

  get value(): T {
    return this.current;
  }

  push(next: T): T {
    this.past.push(this.current);
    this.future = [];
    this.current = next;
    return next;
  }

  undo(): T | null {
    const prev = this.past.pop();
    if (prev === undefined) {
      return null;
    }
    this.future.push(this.current);
    this.current = prev;
    return prev;
  }

  redo(): T | null {
    const next = this.future.pop();
    if (next === undefined) {
      return null;
    }
    this.past.push(this.current);
    this.current = next;
    return next;
  }

  canUndo(): boolean {
    return this.past.length > 0;
  }

  canRedo(): boolean {
    return this.future.length > 0;
  }
}
