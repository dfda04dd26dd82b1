/**
 * Browser entry point: wires the upload form, job list, review panel, plan
 * diff, anchors timeline, and taxonomy widget to the pipeline service API.
 * All values render straight from API responses; nothing is computed locally
 * except presentation (diff alignment, timeline layout).
 */

import { ApiClient, ApiError } from './api.js';
import { diffPlans } from './diff.js';
import { pollJob, type PollerHandle } from './poller.js';
import { deriveJobView, isStaleRevision, type JobView } from './state.js';
import {
  affordanceGlyphs,
  buildTimeline,
  describeAffordance,
  overlayForFrame,
} from './timeline.js';
import {
  exportLabels,
  setLabel,
  TAXONOMY_DESCRIPTIONS,
  TAXONOMY_LABELS,
  type TaxonomyLabel,
  type TaxonomyStore,
} from './taxonomy.js';
import type { AnchorsReport, JobRecord, PlanArtifact } from './types.js';

const client = new ApiClient('');

interface AppState {
  jobs: string[];
  selected: string | null;
  record: JobRecord | null;
  plan: PlanArtifact | null;
  planHistory: Array<{ revision: number; plan: PlanArtifact }>;
  anchors: AnchorsReport | null;
  document: Record<string, unknown> | null;
  scrubberFrame: number;
  taxonomy: TaxonomyStore;
  banner: { tone: 'info' | 'error' | 'success'; text: string } | null;
  poller: PollerHandle | null;
}

const state: AppState = {
  jobs: [],
  selected: null,
  record: null,
  plan: null,
  planHistory: [],
  anchors: null,
  document: null,
  scrubberFrame: 0,
  taxonomy: { labels: {} },
  banner: null,
  poller: null,
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === 'class') {
      node.className = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  node.append(...children);
  return node;
}

function banner(tone: 'info' | 'error' | 'success', text: string): void {
  state.banner = { tone, text };
  render();
}

async function guard<T>(operation: () => Promise<T>): Promise<T | undefined> {
  try {
    return await operation();
  } catch (error) {
    if (error instanceof ApiError && isStaleRevision(error.code)) {
      banner('error', 'Another reviewer updated this job. Refreshing to the latest revision.');
      await refreshSelected();
      return undefined;
    }
    banner('error', error instanceof Error ? error.message : String(error));
    return undefined;
  }
}

async function refreshJobs(): Promise<void> {
  const listing = await guard(() => client.listJobs());
  if (listing) {
    state.jobs = listing.jobs;
    render();
  }
}

async function refreshSelected(): Promise<void> {
  if (!state.selected) {
    return;
  }
  const record = await guard(() => client.getJob(state.selected!));
  if (record) {
    applyRecord(record);
  }
}

function applyRecord(record: JobRecord): void {
  state.record = record;
  void loadArtifacts(record);
  render();
}

async function loadArtifacts(record: JobRecord): Promise<void> {
  const jobId = record.job_id;
  if (record.artifacts['plan']) {
    try {
      const plan = await client.getPlan(jobId);
      state.plan = plan;
      const last = state.planHistory[state.planHistory.length - 1];
      if (!last || JSON.stringify(last.plan.tasks) !== JSON.stringify(plan.tasks)) {
        state.planHistory.push({ revision: record.revision, plan });
      }
    } catch {
      /* plan fetch is best-effort; the record view already shows the state */
    }
  }
  if (record.artifacts['anchors']) {
    try {
      state.anchors = await client.getAnchors(jobId);
    } catch {
      state.anchors = null;
    }
  }
  if (record.artifacts['document']) {
    try {
      state.document = await client.getDocument(jobId);
    } catch {
      state.document = null;
    }
  }
  render();
}

function selectJob(jobId: string): void {
  state.poller?.stop();
  state.selected = jobId;
  state.record = null;
  state.plan = null;
  state.planHistory = [];
  state.anchors = null;
  state.document = null;
  state.poller = pollJob(
    client,
    jobId,
    (record) => applyRecord(record),
    (error) => banner('error', error instanceof Error ? error.message : String(error)),
  );
  render();
}

// --- panels -----------------------------------------------------------------

function uploadPanel(): HTMLElement {
  const frames = el('input', { type: 'file', multiple: '', accept: 'image/*' });
  const stream = el('input', { type: 'file', accept: '.ldjson,.jsonl,.json' });
  const instruction = el('textarea', {
    placeholder: 'Optional text instruction (text-only jobs skip video analysis)',
  });
  const submit = el('button', { class: 'primary' }, 'Upload demonstration');
  submit.addEventListener('click', async () => {
    const frameFiles = Array.from(frames.files ?? []).map((file) => ({
      name: file.name,
      data: file as Blob,
    }));
    const streamFile = stream.files?.[0] ?? undefined;
    if (framesEmpty(frameFiles) && !instruction.value.trim()) {
      banner('error', 'Provide demonstration frames, a text instruction, or both.');
      return;
    }
    const jobId = await guard(() =>
      client.createJob({
        frames: framesEmpty(frameFiles) ? undefined : frameFiles,
        stream: streamFile,
        instruction: instruction.value.trim() || undefined,
      }),
    );
    if (jobId) {
      banner('success', `Job ${jobId} created.`);
      await refreshJobs();
      selectJob(jobId);
    }
  });
  return el(
    'section',
    { class: 'panel' },
    el('h2', {}, 'Upload'),
    el('label', {}, 'Demonstration frames', frames),
    el('label', {}, 'Detection stream (.ldjson)', stream),
    el('label', {}, 'Instruction', instruction),
    submit,
  );
}

function framesEmpty(frames: Array<{ name: string }>): boolean {
  return frames.length === 0;
}

function jobListPanel(): HTMLElement {
  const list = el('ul', { class: 'job-list' });
  for (const jobId of state.jobs) {
    const item = el(
      'li',
      { class: jobId === state.selected ? 'selected' : '' },
      el('button', {}, jobId),
    );
    item.querySelector('button')!.addEventListener('click', () => selectJob(jobId));
    list.append(item);
  }
  const refresh = el('button', {}, 'Refresh');
  refresh.addEventListener('click', () => void refreshJobs());
  return el('section', { class: 'panel' }, el('h2', {}, 'Jobs'), refresh, list);
}

function progressBar(view: JobView): HTMLElement {
  const fill = el('div', { class: 'progress-fill' });
  fill.style.width = `${Math.round(view.stageProgress * 100)}%`;
  return el(
    'div',
    { class: 'progress' },
    fill,
    el('span', { class: 'progress-label' }, `${view.record.state}${view.pendingLabel ? ` · awaiting ${view.pendingLabel}` : ''}`),
  );
}

function reviewPanel(view: JobView): HTMLElement {
  const record = view.record;
  const panel = el('section', { class: 'panel' }, el('h2', {}, `Review (revision ${record.revision})`));
  panel.append(progressBar(view));
  if (record.error) {
    panel.append(el('p', { class: 'error-text' }, record.error));
  }

  // instruction editor
  if (record.instruction) {
    const editor = el('textarea', {});
    editor.value = record.instruction.text;
    const save = el('button', {}, 'Save instruction edit');
    save.disabled = !view.canEditInstruction;
    save.addEventListener('click', async () => {
      const updated = await guard(() =>
        client.review(record.job_id, 'edit_instruction', { text: editor.value }, record.revision),
      );
      if (updated) {
        banner('success', 'Instruction updated; approve it to re-plan.');
        applyRecord(updated);
      }
    });
    panel.append(
      el(
        'div',
        { class: 'field' },
        el('h3', {}, `Instruction (${record.instruction.source})`),
        editor,
        save,
      ),
    );
  }

  // feedback composer
  const feedback = el('textarea', { placeholder: 'e.g. "the object is a drawer, not a safe"' });
  const sendFeedback = el('button', {}, 'Send corrective feedback');
  sendFeedback.disabled = !view.canSendFeedback;
  sendFeedback.addEventListener('click', async () => {
    if (!feedback.value.trim()) {
      banner('error', 'Feedback text is empty.');
      return;
    }
    const updated = await guard(() =>
      client.review(record.job_id, 'feedback', { text: feedback.value }, record.revision),
    );
    if (updated) {
      banner('success', 'Feedback applied; a revised plan is ready for review.');
      applyRecord(updated);
    }
  });
  panel.append(el('div', { class: 'field' }, el('h3', {}, 'Corrective feedback'), feedback, sendFeedback));

  // violations + approve
  if (view.violationBadges.length > 0) {
    const badges = el('div', { class: 'badges' });
    for (const badge of view.violationBadges) {
      badges.append(el('span', { class: 'badge violation' }, badge));
    }
    panel.append(el('div', { class: 'field' }, el('h3', {}, 'Validation violations'), badges));
  }
  const approve = el('button', { class: 'primary' }, 'Approve');
  approve.disabled = !view.canApprove;
  if (view.approveBlockedReason) {
    approve.title = view.approveBlockedReason;
  }
  approve.addEventListener('click', async () => {
    const updated = await guard(() =>
      client.review(record.job_id, 'approve', {}, record.revision),
    );
    if (updated) {
      applyRecord(updated);
    }
  });
  const advance = el('button', {}, 'Advance pipeline');
  advance.disabled = !view.canAdvance;
  advance.addEventListener('click', async () => {
    const updated = await guard(() => client.advance(record.job_id));
    if (updated) {
      applyRecord(updated);
    }
  });
  const actions = el('div', { class: 'actions' }, approve, advance);
  if (view.canOverrideMismatch) {
    const override = el('button', { class: 'danger' }, 'Override anchor mismatch');
    override.addEventListener('click', async () => {
      const updated = await guard(() =>
        client.review(record.job_id, 'override_mismatch', {}, record.revision),
      );
      if (updated) {
        banner('info', 'Mismatch overridden; compilation will mark affordances unavailable.');
        applyRecord(updated);
      }
    });
    actions.append(override);
  }
  if (view.approveBlockedReason && view.needsReview) {
    actions.append(el('span', { class: 'hint' }, view.approveBlockedReason));
  }
  panel.append(actions);

  // taxonomy labeling for eval export
  if (record.instruction && record.instruction.source === 'model') {
    panel.append(taxonomyWidget(record.job_id));
  }
  return panel;
}

function taxonomyWidget(jobId: string): HTMLElement {
  const wrap = el('div', { class: 'field' }, el('h3', {}, 'Transcription taxonomy'));
  const current = state.taxonomy.labels[jobId];
  for (const label of TAXONOMY_LABELS) {
    const button = el(
      'button',
      { class: `taxonomy ${current === label ? 'selected' : ''}`, title: TAXONOMY_DESCRIPTIONS[label] },
      label.replaceAll('_', ' '),
    );
    button.addEventListener('click', () => {
      state.taxonomy = setLabel(state.taxonomy, jobId, label as TaxonomyLabel);
      render();
    });
    wrap.append(button);
  }
  const download = el('button', {}, 'Export labels');
  download.addEventListener('click', () => {
    const payload = exportLabels(state.taxonomy);
    const blob = new Blob([JSON.stringify(payload, null, 2)], { type: 'application/json' });
    const anchor = el('a', { href: URL.createObjectURL(blob), download: 'taxonomy_labels.json' });
    anchor.click();
  });
  wrap.append(download);
  return wrap;
}

function planDiffPanel(): HTMLElement {
  const panel = el('section', { class: 'panel' }, el('h2', {}, 'Plan revisions'));
  if (!state.plan) {
    panel.append(el('p', { class: 'empty' }, 'No plan yet.'));
    return panel;
  }
  const history = state.planHistory;
  const before = history.length >= 2 ? history[history.length - 2]!.plan.tasks : [];
  const after = state.plan.tasks;
  const diff = diffPlans(before, after);
  const table = el('table', { class: 'diff' });
  table.append(
    el('tr', {}, el('th', {}, history.length >= 2 ? 'previous revision' : ''), el('th', {}, 'current plan')),
  );
  for (const row of diff.rows) {
    const left = row.before ? `${row.before.action}(${row.before.args.join(', ')})` : '';
    const right = row.after ? `${row.after.action}(${row.after.args.join(', ')})` : '';
    table.append(
      el(
        'tr',
        { class: `diff-${row.status}` },
        el('td', {}, left),
        el('td', { title: row.after?.explanation ?? '' }, right),
      ),
    );
  }
  panel.append(table);
  if (history.length >= 2) {
    panel.append(
      el('p', { class: 'hint' }, `similarity to previous revision: ${diff.similarity.toFixed(3)}`),
    );
  }
  panel.append(el('p', { class: 'hint' }, state.plan.summary));
  return panel;
}

function timelinePanel(): HTMLElement {
  const panel = el('section', { class: 'panel' }, el('h2', {}, 'Grounding timeline'));
  if (!state.anchors) {
    panel.append(el('p', { class: 'empty' }, 'Grounding has not run yet.'));
    return panel;
  }
  const report = state.anchors;
  const model = buildTimeline(report);
  const svgNs = 'http://www.w3.org/2000/svg';
  const width = 720;
  const height = 64;
  const svg = document.createElementNS(svgNs, 'svg');
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('class', 'timeline');
  for (const band of model.bands) {
    const rect = document.createElementNS(svgNs, 'rect');
    rect.setAttribute('x', String(band.startFrac * width));
    rect.setAttribute('width', String((band.endFrac - band.startFrac) * width));
    rect.setAttribute('y', '18');
    rect.setAttribute('height', '28');
    rect.setAttribute('fill', band.color);
    const title = document.createElementNS(svgNs, 'title');
    title.textContent = band.label;
    rect.append(title);
    svg.append(rect);
  }
  for (const marker of model.markers) {
    const line = document.createElementNS(svgNs, 'line');
    const x = String(marker.frac * width);
    line.setAttribute('x1', x);
    line.setAttribute('x2', x);
    line.setAttribute('y1', '8');
    line.setAttribute('y2', '56');
    line.setAttribute('stroke', marker.kind === 'grasp' ? '#1b5e20' : '#b71c1c');
    line.setAttribute('stroke-width', '3');
    const title = document.createElementNS(svgNs, 'title');
    title.textContent = marker.label;
    line.append(title);
    svg.append(line);
  }
  panel.append(svg);

  // frame scrubber with overlay readout
  const scrubber = el('input', {
    type: 'range',
    min: '0',
    max: String(model.frameCount - 1),
    value: String(state.scrubberFrame),
  });
  const readout = el('div', { class: 'overlay-readout' });
  const updateReadout = () => {
    const frame = Number(scrubber.value);
    state.scrubberFrame = frame;
    const points = overlayForFrame(report, frame);
    readout.replaceChildren(
      el('span', {}, `frame ${frame}`),
      ...points.map((p) =>
        el('span', { class: `overlay-${p.kind}` }, `${p.label}: (${p.x.toFixed(1)}, ${p.y.toFixed(1)})`),
      ),
    );
  };
  scrubber.addEventListener('input', updateReadout);
  updateReadout();
  panel.append(scrubber, readout);

  // per-step affordance inspector
  const inspector = el('div', { class: 'inspector' });
  for (const glyph of affordanceGlyphs(report)) {
    inspector.append(
      el(
        'div',
        { class: `glyph glyph-${glyph.kind}` },
        el('strong', {}, `step ${glyph.stepIndex} ${glyph.action}`),
        el('span', {}, glyph.caption),
      ),
    );
  }
  for (const [key, affordance] of Object.entries(report.affordances)) {
    inspector.append(el('div', { class: 'affordance-row' }, `step ${key}: ${describeAffordance(affordance)}`));
  }
  panel.append(el('h3', {}, 'Affordances'), inspector);
  if (report.warnings.length > 0) {
    panel.append(el('p', { class: 'hint' }, `warnings: ${report.warnings.join(' | ')}`));
  }
  return panel;
}

function documentPanel(): HTMLElement {
  const panel = el('section', { class: 'panel' }, el('h2', {}, 'Executable document'));
  if (!state.document) {
    panel.append(el('p', { class: 'empty' }, 'Not compiled yet.'));
    return panel;
  }
  panel.append(el('pre', { class: 'document' }, JSON.stringify(state.document, null, 2)));
  return panel;
}

function render(): void {
  const root = document.getElementById('app');
  if (!root) {
    return;
  }
  const children: HTMLElement[] = [];
  if (state.banner) {
    children.push(el('div', { class: `banner ${state.banner.tone}` }, state.banner.text));
  }
  const columns = el('div', { class: 'columns' });
  columns.append(el('div', { class: 'column side' }, uploadPanel(), jobListPanel()));
  const mainColumn = el('div', { class: 'column main' });
  if (state.record) {
    const view = deriveJobView(state.record);
    mainColumn.append(reviewPanel(view), planDiffPanel(), timelinePanel(), documentPanel());
  } else {
    mainColumn.append(el('section', { class: 'panel' }, el('p', { class: 'empty' }, 'Select or create a job.')));
  }
  columns.append(mainColumn);
  children.push(columns);
  root.replaceChildren(...children);
}

void refreshJobs();
render();
