/**
 * Job view-model: everything the panels render derives from the last fetched
 * JobRecord. The client never mutates plan content on its own.
 */

import type { JobRecord, JobState } from './types.js';

export const STAGE_ORDER: JobState[] = ['created', 'analyzing', 'planning', 'grounding', 'compiled'];

export interface JobView {
  record: JobRecord;
  stageProgress: number; // 0..1 across the pipeline stages
  needsReview: boolean;
  pendingLabel: string;
  canApprove: boolean;
  approveBlockedReason: string | null;
  canAdvance: boolean;
  canSendFeedback: boolean;
  canEditInstruction: boolean;
  canOverrideMismatch: boolean;
  violationBadges: string[];
  failed: boolean;
}

function stageProgress(record: JobRecord): number {
  if (record.state === 'failed') {
    return 0;
  }
  if (record.state === 'compiled') {
    return 1;
  }
  // needs_review sits between stages; credit completed artifacts instead
  let done = 0;
  if (record.instruction) done += 1;
  if (record.artifacts['plan']) done += 1;
  if (record.artifacts['anchors']) done += 1;
  if (record.artifacts['document']) done += 1;
  return done / 4;
}

export function deriveJobView(record: JobRecord): JobView {
  const needsReview = record.state === 'needs_review';
  const violationBadges = record.violations.map(
    (violation) => `step ${violation.step_index}: ${violation.reason}`,
  );
  let approveBlockedReason: string | null = null;
  if (!needsReview) {
    approveBlockedReason = 'nothing is awaiting review';
  } else if (record.pending === 'plan' && record.violations.length > 0) {
    approveBlockedReason = `resolve ${record.violations.length} validation violation(s) first`;
  } else if (record.pending === 'plan' && !record.artifacts['plan']) {
    approveBlockedReason = 'no plan was produced; edit the instruction or send feedback';
  } else if (record.pending === null) {
    approveBlockedReason = 'nothing is awaiting approval';
  }
  const pendingLabel =
    record.pending === 'instruction'
      ? 'instruction transcription'
      : record.pending === 'plan'
        ? 'task plan'
        : record.pending === 'mismatch'
          ? 'anchor count mismatch'
          : '';
  return {
    record,
    stageProgress: stageProgress(record),
    needsReview,
    pendingLabel,
    canApprove: needsReview && approveBlockedReason === null,
    approveBlockedReason,
    canAdvance:
      (needsReview && record.approved) ||
      record.state === 'created' ||
      record.state === 'grounding',
    canSendFeedback: needsReview && Boolean(record.artifacts['plan']),
    canEditInstruction: needsReview && record.instruction !== null,
    canOverrideMismatch: needsReview && record.pending === 'mismatch',
    violationBadges,
    failed: record.state === 'failed',
  };
}

/** True when a conflicting edit won and the panel must refresh before retrying. */
export function isStaleRevision(code: string): boolean {
  return code === 'stale_revision';
}
