/** Side-by-side plan-revision diff model built on the Levenshtein alignment. */

import { align, levenshtein, similarity } from './levenshtein.js';
import type { PlanTask } from './types.js';

export type DiffStatus = 'unchanged' | 'changed' | 'removed' | 'added';

export interface DiffRow {
  status: DiffStatus;
  /** Task from the earlier revision (null for added rows). */
  before: PlanTask | null;
  /** Task from the later revision (null for removed rows). */
  after: PlanTask | null;
}

export interface PlanDiff {
  rows: DiffRow[];
  distance: number;
  similarity: number;
}

export function taskToken(task: PlanTask): string {
  return `${task.action}(${task.args.join(', ')})`;
}

export function diffPlans(before: PlanTask[], after: PlanTask[]): PlanDiff {
  const a = before.map(taskToken);
  const b = after.map(taskToken);
  const rows: DiffRow[] = align(a, b).map((op) => {
    switch (op.kind) {
      case 'match':
        return { status: 'unchanged', before: before[op.a]!, after: after[op.b]! };
      case 'substitute':
        return { status: 'changed', before: before[op.a]!, after: after[op.b]! };
      case 'delete':
        return { status: 'removed', before: before[op.a]!, after: null };
      case 'insert':
        return { status: 'added', before: null, after: after[op.b]! };
    }
  });
  return { rows, distance: levenshtein(a, b), similarity: similarity(a, b) };
}
