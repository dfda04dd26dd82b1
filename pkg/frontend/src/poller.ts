/** Fixed-interval job polling (2 s): simplest correct refresh at this scale. */

import type { ApiClient } from './api.js';
import type { JobRecord } from './types.js';

export const POLL_INTERVAL_MS = 2000;

export interface PollerHandle {
  stop(): void;
}

export function pollJob(
  client: ApiClient,
  jobId: string,
  onUpdate: (record: JobRecord) => void,
  onError: (error: unknown) => void,
  intervalMs: number = POLL_INTERVAL_MS,
  schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
): PollerHandle {
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | undefined;

  const tick = async () => {
    if (stopped) {
      return;
    }
    try {
      const record = await client.getJob(jobId);
      if (!stopped) {
        onUpdate(record);
      }
      if (record.state === 'compiled' || record.state === 'failed') {
        return; // terminal states stop the loop
      }
    } catch (error) {
      if (!stopped) {
        onError(error);
      }
    }
    if (!stopped) {
      timer = schedule(tick, intervalMs);
    }
  };

  void tick();
  return {
    stop() {
      stopped = true;
      if (timer !== undefined) {
        clearTimeout(timer);
      }
    },
  };
}
