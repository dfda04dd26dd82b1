/** Typed client for the pipeline service; the UI's only data source. */

import type { AnchorsReport, JobRecord, PlanArtifact, ProblemDetails, ReviewAction } from './types.js';

export class ApiError extends Error {
  constructor(
    readonly problem: ProblemDetails,
    readonly status: number,
  ) {
    super(problem.detail || problem.title);
  }

  get code(): string {
    return this.problem.code;
  }
}

async function parseError(response: Response): Promise<never> {
  let problem: ProblemDetails;
  try {
    problem = (await response.json()) as ProblemDetails;
  } catch {
    problem = {
      type: 'about:blank',
      title: response.statusText,
      status: response.status,
      detail: response.statusText,
      code: 'unknown',
    };
  }
  throw new ApiError(problem, response.status);
}

export interface UploadPayload {
  frames?: Array<{ name: string; data: Blob }>;
  stream?: Blob;
  instruction?: string;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string = '',
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      await parseError(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request('/api/healthz');
  }

  async createJob(payload: UploadPayload): Promise<string> {
    const form = new FormData();
    for (const frame of payload.frames ?? []) {
      form.append('frames', frame.data, frame.name);
    }
    if (payload.stream) {
      form.append('stream', payload.stream, 'stream.ldjson');
    }
    if (payload.instruction) {
      form.append('instruction', payload.instruction);
    }
    const result = await this.request<{ job_id: string }>('/api/jobs', {
      method: 'POST',
      body: form,
    });
    return result.job_id;
  }

  listJobs(): Promise<{ jobs: string[] }> {
    return this.request('/api/jobs');
  }

  getJob(jobId: string): Promise<JobRecord> {
    return this.request(`/api/jobs/${jobId}`);
  }

  advance(jobId: string): Promise<JobRecord> {
    return this.request(`/api/jobs/${jobId}/advance`, { method: 'POST' });
  }

  review(
    jobId: string,
    action: ReviewAction,
    payload: Record<string, unknown> = {},
    expectedRevision?: number,
  ): Promise<JobRecord> {
    return this.request(`/api/jobs/${jobId}/review`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({
        action,
        payload,
        expected_revision: expectedRevision ?? null,
      }),
    });
  }

  getPlan(jobId: string): Promise<PlanArtifact> {
    return this.request(`/api/jobs/${jobId}/plan`);
  }

  getAnchors(jobId: string): Promise<AnchorsReport> {
    return this.request(`/api/jobs/${jobId}/anchors`);
  }

  getDocument(jobId: string): Promise<Record<string, unknown>> {
    return this.request(`/api/jobs/${jobId}/document`);
  }

  getTranscript(jobId: string): Promise<{ messages: Array<{ role: string; text: string }> }> {
    return this.request(`/api/jobs/${jobId}/transcript`);
  }
}
