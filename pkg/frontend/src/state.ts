/**
 * Client session state: a pure function of the last server response plus
 * the locally accumulated transcript, so a refresh can always rebuild it.
 */

import type { SessionView } from './types';

export interface TranscriptEntry {
  step: number;
  action: string;
  reward: number;
  score: number;
}

export interface ClientSession {
  view: SessionView;
  transcript: TranscriptEntry[];
  busy: boolean;
}

export function freshSession(view: SessionView): ClientSession {
  return { view, transcript: [], busy: false };
}

export function applyResponse(
  session: ClientSession,
  actionTaken: string,
  response: SessionView
): ClientSession {
  const entry: TranscriptEntry = {
    step: response.step,
    action: actionTaken,
    reward: response.reward ?? 0,
    score: response.score,
  };
  return {
    view: response,
    transcript: [...session.transcript, entry],
    busy: false,
  };
}

export function refreshView(session: ClientSession, view: SessionView): ClientSession {
  return { ...session, view, busy: false };
}

export function normalizedScore(view: SessionView): number {
  return view.max_score === 0 ? 0 : view.score / view.max_score;
}

export function completionLabel(view: SessionView): string {
  return `${view.step} / optimal ${view.optimal_steps}`;
}
