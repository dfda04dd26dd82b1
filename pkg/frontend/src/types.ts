/** Wire types mirrored from the pipeline service API. */

export type JobState =
  | 'created'
  | 'analyzing'
  | 'needs_review'
  | 'planning'
  | 'grounding'
  | 'compiled'
  | 'failed';

export type PendingReview = 'instruction' | 'plan' | 'mismatch' | null;

export interface JobRecord {
  job_id: string;
  state: JobState;
  revision: number;
  pending: PendingReview;
  approved: boolean;
  instruction: { text: string; source: 'model' | 'human_edited' } | null;
  violations: Array<{ step_index: number; reason: string }>;
  warnings: string[];
  error: string | null;
  artifacts: Record<string, string>;
  fixture_hashes: string[];
  config_digest: string;
}

export interface PlanTask {
  action: string;
  args: string[];
  explanation: string;
}

export interface PlanArtifact {
  tasks: PlanTask[];
  summary: string;
  validated: boolean;
  violations: Array<{ step_index: number; reason: string }>;
}

export interface AnchorView {
  kind: 'grasp' | 'release';
  frame_index: number;
  object_label: string;
  hand_position_2d: [number, number];
  object_position_2d: [number, number];
  hand_position_3d: [number, number, number] | null;
  object_position_3d: [number, number, number] | null;
}

export interface ClipView {
  start_frame: number;
  end_frame: number;
  kind: 'Grasp' | 'Release' | 'Other';
}

export interface AlignmentView {
  step_index: number;
  action: string;
  args: string[];
  anchor_frame: number | null;
  segment: [number, number] | null;
}

export interface AffordanceView {
  kind: string;
  postures: Array<{
    frame_index: number;
    upper_arm: number[] | null;
    forearm: number[] | null;
  }>;
  warnings: string[];
  [key: string]: unknown;
}

export interface AnchorsReport {
  clips: ClipView[];
  anchors: AnchorView[];
  alignments: AlignmentView[];
  affordances: Record<string, AffordanceView>;
  warnings: string[];
}

export interface ProblemDetails {
  type: string;
  title: string;
  status: number;
  detail: string;
  code: string;
}

export type ReviewAction = 'edit_instruction' | 'feedback' | 'approve' | 'override_mismatch';
