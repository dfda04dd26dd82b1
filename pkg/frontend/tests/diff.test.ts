import { describe, expect, it } from 'vitest';

import { diffPlans, taskToken } from '../src/diff.js';
import type { PlanTask } from '../src/types.js';

const task = (action: string, ...args: string[]): PlanTask => ({ action, args, explanation: '' });

describe('diffPlans', () => {
  it('marks a corrected object as changed', () => {
    // the drawer-not-a-safe correction: same shape, different object
    const before = [task('Grab', 'safe handle'), task('Rotate', 'safe handle'), task('Release', 'safe handle')];
    const after = [task('Grab', 'drawer handle'), task('Slide', 'drawer handle'), task('Release', 'drawer handle')];
    const diff = diffPlans(before, after);
    expect(diff.rows.map((r) => r.status)).toEqual(['changed', 'changed', 'changed']);
    expect(diff.distance).toBe(3);
  });

  it('marks an inserted step as added', () => {
    const before = [task('Grab', 'juice'), task('Put', 'juice', 'shelf'), task('Release', 'juice')];
    const after = [
      task('Grab', 'juice'),
      task('PickUp', 'juice'),
      task('Put', 'juice', 'shelf'),
      task('Release', 'juice'),
    ];
    const diff = diffPlans(before, after);
    expect(diff.rows.map((r) => r.status)).toEqual(['unchanged', 'added', 'unchanged', 'unchanged']);
    expect(diff.rows[1]!.after!.action).toBe('PickUp');
  });

  it('marks a dropped step as removed', () => {
    const before = [task('Grab', 'juice'), task('MoveHand', 'shelf'), task('Release', 'juice')];
    const after = [task('Grab', 'juice'), task('Release', 'juice')];
    const diff = diffPlans(before, after);
    expect(diff.rows.map((r) => r.status)).toEqual(['unchanged', 'removed', 'unchanged']);
    expect(diff.similarity).toBeCloseTo(1 - 1 / 3, 12);
  });

  it('treats an empty previous revision as all additions', () => {
    const after = [task('Grab', 'juice')];
    const diff = diffPlans([], after);
    expect(diff.rows.map((r) => r.status)).toEqual(['added']);
  });

  it('tokens carry arguments so argument edits count', () => {
    expect(taskToken(task('Put', 'juice', 'top shelf'))).toBe('Put(juice, top shelf)');
    const diff = diffPlans([task('Grab', 'juice')], [task('Grab', 'cup')]);
    expect(diff.rows[0]!.status).toBe('changed');
  });
});
