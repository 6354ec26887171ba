export interface GameInfo {
  id: string;
  difficulty: string;
  split: string;
  optimal_steps: number;
}

export interface SessionView {
  session_id: string;
  game_id: string;
  observation: string;
  admissible: string[];
  score: number;
  max_score: number;
  step: number;
  done: boolean;
  optimal_steps: number;
  reward?: number;
}

export interface SessionDetail extends SessionView {
  annotator: string;
  transcript: TranscriptRecord[];
}

export interface TranscriptRecord {
  kind: 'start' | 'step';
  t?: number;
  action?: string;
  reward?: number;
  score?: number;
  done?: boolean;
}

export interface SummaryRow {
  annotator: string;
  difficulty: string;
  games: number;
  mean_steps: number;
  mean_score: number;
}

export interface AttentionStep {
  t: number;
  action_taken?: string;
  nodes: string[];
  weights_per_action: Record<string, number[]>;
}

export interface AttentionExport {
  schema_version: number;
  steps: AttentionStep[];
}
