/**
 * Token-level Levenshtein distance, normalized similarity, and alignment.
 *
 * Re-implements the evaluation harness's semantics client-side so plan diffs
 * render without a server round trip; parity is pinned by the shared test
 * vectors in tests/data/levenshtein_vectors.json.
 */

export type EditOp =
  | { kind: 'match'; a: number; b: number }
  | { kind: 'substitute'; a: number; b: number }
  | { kind: 'delete'; a: number }
  | { kind: 'insert'; b: number };

export function levenshtein(a: readonly string[], b: readonly string[]): number {
  const rows = a.length + 1;
  const cols = b.length + 1;
  let previous = Array.from({ length: cols }, (_, j) => j);
  for (let i = 1; i < rows; i += 1) {
    const current = new Array<number>(cols);
    current[0] = i;
    for (let j = 1; j < cols; j += 1) {
      const cost = a[i - 1] === b[j - 1] ? 0 : 1;
      current[j] = Math.min(previous[j]! + 1, current[j - 1]! + 1, previous[j - 1]! + cost);
    }
    previous = current;
  }
  return previous[cols - 1]!;
}

/** 1 means a perfect match; two empty sequences match by convention. */
export function similarity(a: readonly string[], b: readonly string[]): number {
  if (a.length === 0 && b.length === 0) {
    return 1.0;
  }
  return 1.0 - levenshtein(a, b) / Math.max(a.length, b.length);
}

/**
 * Optimal edit script via full-table backtrace. Ties prefer match/substitute,
 * then delete, then insert, which keeps diffs stable across revisions.
 */
export function align(a: readonly string[], b: readonly string[]): EditOp[] {
  const rows = a.length + 1;
  const cols = b.length + 1;
  const table: number[][] = Array.from({ length: rows }, () => new Array<number>(cols).fill(0));
  for (let i = 0; i < rows; i += 1) table[i]![0] = i;
  for (let j = 0; j < cols; j += 1) table[0]![j] = j;
  for (let i = 1; i < rows; i += 1) {
    for (let j = 1; j < cols; j += 1) {
      const cost = a[i - 1] === b[j - 1] ? 0 : 1;
      table[i]![j] = Math.min(
        table[i - 1]![j]! + 1,
        table[i]![j - 1]! + 1,
        table[i - 1]![j - 1]! + cost,
      );
    }
  }
  const ops: EditOp[] = [];
  let i = a.length;
  let j = b.length;
  while (i > 0 || j > 0) {
    const here = table[i]![j]!;
    if (i > 0 && j > 0) {
      const diagonal = table[i - 1]![j - 1]!;
      if (a[i - 1] === b[j - 1] && here === diagonal) {
        ops.push({ kind: 'match', a: i - 1, b: j - 1 });
        i -= 1;
        j -= 1;
        continue;
      }
      if (here === diagonal + 1) {
        ops.push({ kind: 'substitute', a: i - 1, b: j - 1 });
        i -= 1;
        j -= 1;
        continue;
      }
    }
    if (i > 0 && here === table[i - 1]![j]! + 1) {
      ops.push({ kind: 'delete', a: i - 1 });
      i -= 1;
      continue;
    }
    ops.push({ kind: 'insert', b: j - 1 });
    j -= 1;
  }
  return ops.reverse();
}
