/** Shapes mirrored from the run service; never mutated locally. */

export interface PlacementThumb {
  index: number;
  path: string;
}

export interface SectionView {
  name: string;
  excerpt: string;
  placements: PlacementThumb[];
}

export type CheckpointKind = "content" | "template" | "html" | null;

export interface RunView {
  run_id: string;
  stage: string;
  mode: string;
  pending_checkpoint: CheckpointKind;
  sections: SectionView[];
  event_cursor: number;
  failure: string | null;
}

export interface RunEvent {
  index: number;
  ts: number;
  type: string;
  [key: string]: unknown;
}

export interface TemplateCard {
  template_id: string;
  tags: Record<string, unknown>;
  complexity: number;
}
