/** Failure-taxonomy labeling for evaluation export: one label per reviewed transcription. */

export const TAXONOMY_LABELS = [
  'valid',
  'illusory_object',
  'illusory_motion',
  'visually_difficult',
] as const;

export type TaxonomyLabel = (typeof TAXONOMY_LABELS)[number];

export const TAXONOMY_DESCRIPTIONS: Record<TaxonomyLabel, string> = {
  valid: 'object and action both transcribed correctly',
  illusory_object: 'an object not being manipulated (or not present) was named',
  illusory_motion: 'right object, but the described action never happened',
  visually_difficult: 'failure blamed on resolution, blur, or viewpoint',
};

export interface TaxonomyStore {
  labels: Record<string, TaxonomyLabel>;
}

export function setLabel(store: TaxonomyStore, jobId: string, label: TaxonomyLabel): TaxonomyStore {
  return { labels: { ...store.labels, [jobId]: label } };
}

export interface TaxonomyExport {
  labels: Array<{ job_id: string; label: TaxonomyLabel }>;
  tally: Record<TaxonomyLabel, number>;
  fractions: Record<TaxonomyLabel, number>;
}

/** Export payload consumed by the evaluation harness's taxonomy tally. */
export function exportLabels(store: TaxonomyStore): TaxonomyExport {
  const entries = Object.entries(store.labels).sort(([a], [b]) => a.localeCompare(b));
  const tally = Object.fromEntries(TAXONOMY_LABELS.map((label) => [label, 0])) as Record<
    TaxonomyLabel,
    number
  >;
  for (const [, label] of entries) {
    tally[label] += 1;
  }
  const total = entries.length;
  const fractions = Object.fromEntries(
    TAXONOMY_LABELS.map((label) => [label, total > 0 ? tally[label] / total : 0]),
  ) as Record<TaxonomyLabel, number>;
  return {
    labels: entries.map(([job_id, label]) => ({ job_id, label })),
    tally,
    fractions,
  };
}
