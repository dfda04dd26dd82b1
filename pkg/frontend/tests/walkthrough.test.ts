// Full upload -> review -> approve -> compiled walkthrough against the real
// replay-backed pipeline service, driven through the UI's API client.
import { spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join, dirname } from 'node:path';
import { fileURLToPath } from 'node:url';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';
import { deriveJobView } from '../src/state.js';
import { buildTimeline } from '../src/timeline.js';

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = join(here, '..', '..');
const fixtureRoot = join(repoRoot, 'fixtures', 'juice_relocation');
const port = 8930 + Math.floor(Math.random() * 100);

let service: ChildProcess;
let jobsDir: string;
const client = new ApiClient(`http://127.0.0.1:${port}`);

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const health = await client.health();
      if (health.status === 'ok') return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
  throw new Error('pipeline service did not become healthy');
}

beforeAll(async () => {
  jobsDir = mkdtempSync(join(tmpdir(), 'demo2plan-ui-'));
  service = spawn(
    'demo2plan',
    [
      '--transport',
      'replay',
      '--fixtures',
      join(fixtureRoot, 'fixtures'),
      'serve',
      '--jobs-dir',
      jobsDir,
      '--port',
      String(port),
    ],
    { cwd: repoRoot, stdio: 'ignore' },
  );
  await waitForHealth();
});

afterAll(() => {
  service?.kill('SIGTERM');
  rmSync(jobsDir, { recursive: true, force: true });
});

describe('upload -> review -> approve -> compiled', () => {
  let jobId: string;

  it('uploads the demonstration and creates a job', async () => {
    const frames = [0, 1, 2, 3, 4].map((i) => {
      const name = `frame_0${i}.png`;
      return { name, data: new Blob([readFileSync(join(fixtureRoot, 'frames', name))]) };
    });
    const stream = new Blob([readFileSync(join(fixtureRoot, 'stream.ldjson'))]);
    jobId = await client.createJob({ frames, stream });
    expect(jobId).toMatch(/^[0-9A-Z]{26}$/);
    const record = await client.getJob(jobId);
    expect(record.state).toBe('created');
  });

  it('video analysis lands in instruction review', async () => {
    const record = await client.advance(jobId);
    expect(record.state).toBe('needs_review');
    expect(record.pending).toBe('instruction');
    expect(record.instruction!.text).toContain('juice');
    const view = deriveJobView(record);
    expect(view.canApprove).toBe(true);
    expect(view.canAdvance).toBe(false); // approval must come first
  });

  it('approving the instruction unlocks planning', async () => {
    const approved = await client.review(jobId, 'approve', {}, 0);
    expect(approved.approved).toBe(true);
    const record = await client.advance(jobId);
    expect(record.pending).toBe('plan');
    const plan = await client.getPlan(jobId);
    expect(plan.tasks.map((t) => t.action)).toEqual(['Grab', 'PickUp', 'MoveHand', 'Put', 'Release']);
    expect(plan.violations).toEqual([]);
    expect(deriveJobView(record).canApprove).toBe(true);
  });

  it('stale revision edits are rejected with a refresh prompt code', async () => {
    await expect(
      client.review(jobId, 'edit_instruction', { text: 'changed' }, 999),
    ).rejects.toMatchObject({ status: 409 });
    try {
      await client.review(jobId, 'edit_instruction', { text: 'changed' }, 999);
    } catch (error) {
      expect((error as ApiError).code).toBe('stale_revision');
    }
  });

  it('plan approval, grounding, and compile complete the pipeline', async () => {
    await client.review(jobId, 'approve', {}, 0);
    const grounded = await client.advance(jobId);
    expect(grounded.state).toBe('grounding');
    const compiled = await client.advance(jobId);
    expect(compiled.state).toBe('compiled');
  });

  it('anchors render on the timeline', async () => {
    const report = await client.getAnchors(jobId);
    expect(report.anchors.map((a) => a.kind)).toEqual(['grasp', 'release']);
    const model = buildTimeline(report);
    expect(model.markers).toHaveLength(2);
    expect(model.bands.some((b) => b.kind === 'Grasp')).toBe(true);
    expect(model.bands.some((b) => b.kind === 'Release')).toBe(true);
  });

  it('the served document round-trips byte-content-identical to the golden', async () => {
    const document = await client.getDocument(jobId);
    const golden = JSON.parse(readFileSync(join(fixtureRoot, 'expected_document.json'), 'utf-8'));
    expect(document).toEqual(golden); // no client-side mutation of plan content
  });

  it('advancing a compiled job is a 409 problem-details error', async () => {
    await expect(client.advance(jobId)).rejects.toMatchObject({ status: 409 });
  });
});
