/** Job polling: 1 s interval until the job reaches a terminal state. */

import type { ApiClient } from './api.js';
import type { JobView } from './types.js';

const wait = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export async function pollJob(
  client: ApiClient,
  jobId: string,
  intervalMs = 1000,
  sleep: (ms: number) => Promise<void> = wait,
): Promise<JobView> {
  for (;;) {
    const job = await client.getJob(jobId);
    if (job.state === 'Done' || job.state === 'Failed') return job;
    await sleep(intervalMs);
  }
}
