import { describe, expect, it } from 'vitest';

import type { ApiClient } from '../src/api.js';
import { pollJob } from '../src/poller.js';
import type { JobRecord } from '../src/types.js';

function fakeRecord(state: JobRecord['state']): JobRecord {
  return {
    job_id: 'J',
    state,
    revision: 0,
    pending: null,
    approved: false,
    instruction: null,
    violations: [],
    warnings: [],
    error: null,
    artifacts: {},
    fixture_hashes: [],
    config_digest: '',
  };
}

function clientReturning(states: JobRecord['state'][]): ApiClient {
  const queue = [...states];
  return {
    getJob: async () => fakeRecord(queue.length > 1 ? queue.shift()! : queue[0]!),
  } as unknown as ApiClient;
}

/** Runs scheduled callbacks immediately, counting the scheduled polls. */
function immediateScheduler() {
  let scheduled = 0;
  const schedule = (fn: () => void) => {
    scheduled += 1;
    queueMicrotask(fn);
    return 0 as unknown as ReturnType<typeof setTimeout>;
  };
  return { schedule, count: () => scheduled };
}

const settle = () => new Promise((resolve) => setTimeout(resolve, 20));

describe('pollJob', () => {
  it('keeps polling until a terminal state and then stops', async () => {
    const updates: JobRecord['state'][] = [];
    const { schedule, count } = immediateScheduler();
    pollJob(
      clientReturning(['analyzing', 'grounding', 'compiled']),
      'J',
      (record) => updates.push(record.state),
      () => undefined,
      1,
      schedule,
    );
    await settle();
    expect(updates[updates.length - 1]).toBe('compiled');
    const scheduledAtStop = count();
    await settle();
    expect(count()).toBe(scheduledAtStop); // no polls after the terminal state
  });

  it('stop() halts the loop', async () => {
    const updates: string[] = [];
    const { schedule } = immediateScheduler();
    const handle = pollJob(
      clientReturning(['analyzing']),
      'J',
      (record) => {
        updates.push(record.state);
        handle.stop();
      },
      () => undefined,
      1,
      schedule,
    );
    await settle();
    const seen = updates.length;
    await settle();
    expect(updates.length).toBe(seen);
  });

  it('errors are surfaced and polling continues', async () => {
    const errors: unknown[] = [];
    let calls = 0;
    const flaky = {
      getJob: async () => {
        calls += 1;
        if (calls === 1) throw new Error('transient');
        return fakeRecord('compiled');
      },
    } as unknown as ApiClient;
    const { schedule } = immediateScheduler();
    pollJob(flaky, 'J', () => undefined, (e) => errors.push(e), 1, schedule);
    await settle();
    expect(errors).toHaveLength(1);
    expect(calls).toBeGreaterThanOrEqual(2);
  });
});
