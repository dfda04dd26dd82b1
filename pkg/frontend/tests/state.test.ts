import { describe, expect, it } from 'vitest';

import { deriveJobView, isStaleRevision } from '../src/state.js';
import type { JobRecord } from '../src/types.js';

function record(overrides: Partial<JobRecord> = {}): JobRecord {
  return {
    job_id: '01TEST',
    state: 'needs_review',
    revision: 0,
    pending: 'plan',
    approved: false,
    instruction: { text: 'move the juice', source: 'model' },
    violations: [],
    warnings: [],
    error: null,
    artifacts: { plan: 'plan.json' },
    fixture_hashes: [],
    config_digest: 'abc',
    ...overrides,
  };
}

describe('approve gating', () => {
  it('allows approval of a clean plan', () => {
    const view = deriveJobView(record());
    expect(view.canApprove).toBe(true);
    expect(view.approveBlockedReason).toBeNull();
  });

  it('blocks approval while validation violations exist', () => {
    const view = deriveJobView(
      record({ violations: [{ step_index: 0, reason: 'cannot Release(juice): juice is not held' }] }),
    );
    expect(view.canApprove).toBe(false);
    expect(view.approveBlockedReason).toMatch(/violation/);
    expect(view.violationBadges[0]).toContain('step 0');
  });

  it('blocks approval outside review states', () => {
    expect(deriveJobView(record({ state: 'compiled', pending: null })).canApprove).toBe(false);
    expect(deriveJobView(record({ state: 'grounding', pending: null })).canApprove).toBe(false);
  });

  it('blocks approval when planning failed to produce a plan', () => {
    const view = deriveJobView(record({ artifacts: {} }));
    expect(view.canApprove).toBe(false);
    expect(view.approveBlockedReason).toMatch(/no plan/);
  });
});

describe('review affordances', () => {
  it('mismatch reviews expose the override control', () => {
    const view = deriveJobView(record({ pending: 'mismatch', error: 'plan expects 1 grasp...' }));
    expect(view.canOverrideMismatch).toBe(true);
    expect(view.pendingLabel).toBe('anchor count mismatch');
  });

  it('feedback requires an existing plan', () => {
    expect(deriveJobView(record()).canSendFeedback).toBe(true);
    expect(deriveJobView(record({ artifacts: {} })).canSendFeedback).toBe(false);
  });

  it('advance is gated on approval', () => {
    expect(deriveJobView(record()).canAdvance).toBe(false);
    expect(deriveJobView(record({ approved: true })).canAdvance).toBe(true);
    expect(deriveJobView(record({ state: 'created', pending: null })).canAdvance).toBe(true);
  });
});

describe('stage progress', () => {
  it('grows with completed artifacts and tops out at compiled', () => {
    const none = deriveJobView(record({ state: 'created', pending: null, instruction: null, artifacts: {} }));
    const some = deriveJobView(record());
    const done = deriveJobView(record({ state: 'compiled', pending: null }));
    expect(none.stageProgress).toBe(0);
    expect(some.stageProgress).toBeGreaterThan(none.stageProgress);
    expect(done.stageProgress).toBe(1);
  });

  it('failed jobs are flagged', () => {
    const view = deriveJobView(record({ state: 'failed', error: 'boom', pending: null }));
    expect(view.failed).toBe(true);
  });
});

describe('stale revision detection', () => {
  it('matches the service error code', () => {
    expect(isStaleRevision('stale_revision')).toBe(true);
    expect(isStaleRevision('invalid_state')).toBe(false);
  });
});
