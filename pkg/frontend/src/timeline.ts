/**
 * Anchors-timeline view model: clip bands colored by kind, anchor markers,
 * per-frame scrubber overlays, and affordance glyphs (direction arrows,
 * waypoint polylines). Pure layout math; the DOM layer just draws it.
 */

import type { AffordanceView, AnchorsReport, AnchorView, ClipView } from './types.js';

export const CLIP_COLORS: Record<ClipView['kind'], string> = {
  Grasp: '#2e7d32',
  Release: '#c62828',
  Other: '#90a4ae',
};

export interface TimelineBand {
  startFrac: number;
  endFrac: number;
  color: string;
  kind: ClipView['kind'];
  label: string;
}

export interface TimelineMarker {
  frac: number;
  frame: number;
  kind: AnchorView['kind'];
  label: string;
}

export interface TimelineModel {
  frameCount: number;
  bands: TimelineBand[];
  markers: TimelineMarker[];
}

export function buildTimeline(report: AnchorsReport): TimelineModel {
  const last = report.clips.length > 0 ? report.clips[report.clips.length - 1]!.end_frame : 0;
  const frameCount = last + 1;
  const bands = report.clips.map((clip) => ({
    startFrac: clip.start_frame / frameCount,
    endFrac: (clip.end_frame + 1) / frameCount,
    color: CLIP_COLORS[clip.kind],
    kind: clip.kind,
    label: `${clip.kind} [${clip.start_frame}-${clip.end_frame}]`,
  }));
  const markers = report.anchors.map((anchor) => ({
    frac: anchor.frame_index / frameCount,
    frame: anchor.frame_index,
    kind: anchor.kind,
    label: `${anchor.kind} ${anchor.object_label} @ ${anchor.frame_index}`,
  }));
  return { frameCount, bands, markers };
}

export interface OverlayPoint {
  x: number;
  y: number;
  kind: 'hand' | 'object';
  label: string;
}

/** Anchor hand/object points shown when the scrubber sits on an anchor frame. */
export function overlayForFrame(report: AnchorsReport, frame: number): OverlayPoint[] {
  const points: OverlayPoint[] = [];
  for (const anchor of report.anchors) {
    if (anchor.frame_index !== frame) {
      continue;
    }
    points.push({
      x: anchor.hand_position_2d[0],
      y: anchor.hand_position_2d[1],
      kind: 'hand',
      label: `hand (${anchor.kind})`,
    });
    points.push({
      x: anchor.object_position_2d[0],
      y: anchor.object_position_2d[1],
      kind: 'object',
      label: anchor.object_label,
    });
  }
  return points;
}

export interface AffordanceGlyph {
  stepIndex: number;
  action: string;
  kind: 'arrow' | 'polyline' | 'axis' | 'vector' | 'unavailable';
  /** Direction arrows and axes in quantized coordinates; polylines in meters. */
  points: number[][];
  caption: string;
}

function vec(value: unknown): number[] | null {
  return Array.isArray(value) && value.every((x) => typeof x === 'number')
    ? (value as number[])
    : null;
}

export function affordanceGlyphs(report: AnchorsReport): AffordanceGlyph[] {
  const glyphs: AffordanceGlyph[] = [];
  for (const [key, affordance] of Object.entries(report.affordances)) {
    const stepIndex = Number(key);
    const alignment = report.alignments.find((a) => a.step_index === stepIndex);
    const action = alignment?.action ?? affordance.kind;
    const push = (kind: AffordanceGlyph['kind'], points: number[][], caption: string) =>
      glyphs.push({ stepIndex, action, kind, points, caption });

    if ('unavailable' in affordance) {
      push('unavailable', [], String(affordance['unavailable']));
      continue;
    }
    const direction =
      vec(affordance['approach_direction']) ??
      vec(affordance['withdrawal_direction']) ??
      vec(affordance['departure_direction']);
    if (direction) {
      push('arrow', [direction], `${action} direction`);
    }
    const waypoints = affordance['waypoints'];
    if (Array.isArray(waypoints) && waypoints.length > 0) {
      push('polyline', waypoints as number[][], `${waypoints.length} waypoints`);
    }
    const axis = vec(affordance['axis']);
    if (axis) {
      const angle = Number(affordance['angle'] ?? 0);
      push('axis', [axis], `rotation ${(angle * 180 / Math.PI).toFixed(1)} deg`);
    }
    const displacement = vec(affordance['displacement']);
    if (displacement) {
      push('vector', [displacement], 'slide displacement');
    }
    const normal = vec(affordance['surface_normal']);
    if (normal) {
      push('arrow', [normal], 'surface normal');
    }
  }
  return glyphs.sort((a, b) => a.stepIndex - b.stepIndex);
}

export function describeAffordance(affordance: AffordanceView): string {
  if ('unavailable' in affordance) {
    return `unavailable: ${String(affordance['unavailable'])}`;
  }
  const parts: string[] = [];
  for (const key of [
    'approach_direction',
    'withdrawal_direction',
    'departure_direction',
    'axis',
    'displacement',
    'surface_normal',
  ]) {
    const value = vec(affordance[key]);
    if (value) {
      parts.push(`${key.replaceAll('_', ' ')}: [${value.map((x) => x.toFixed(3)).join(', ')}]`);
    }
  }
  if (typeof affordance['grasp_type'] === 'string') {
    parts.push(`grasp type: ${affordance['grasp_type']}`);
  }
  if (typeof affordance['angle'] === 'number') {
    parts.push(`angle: ${((affordance['angle'] as number) * 180 / Math.PI).toFixed(1)} deg`);
  }
  if (Array.isArray(affordance['waypoints'])) {
    parts.push(`${(affordance['waypoints'] as unknown[]).length} waypoints`);
  }
  return parts.join(' · ') || affordance.kind;
}
