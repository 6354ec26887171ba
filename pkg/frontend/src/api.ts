/**
 * Thin client for the play service. Every action submission carries the
 * step nonce; a 409 means our admissible list is stale and the caller
 * should refresh the session.
 */

import type { GameInfo, SessionDetail, SessionView, SummaryRow } from './types';

const API_BASE = '/api';

export class StaleActionError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'StaleActionError';
  }
}

async function getJson<T>(path: string): Promise<T> {
  const response = await fetch(`${API_BASE}${path}`);
  if (!response.ok) throw new Error(`GET ${path} failed: ${response.status}`);
  return response.json() as Promise<T>;
}

async function postJson<T>(path: string, payload: unknown): Promise<T> {
  const response = await fetch(`${API_BASE}${path}`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(payload),
  });
  if (response.status === 409) {
    const body = await response.json().catch(() => ({ detail: 'conflict' }));
    throw new StaleActionError(String(body.detail ?? 'conflict'));
  }
  if (!response.ok) throw new Error(`POST ${path} failed: ${response.status}`);
  return response.json() as Promise<T>;
}

export async function listGames(): Promise<GameInfo[]> {
  const body = await getJson<{ games: GameInfo[] }>('/games');
  return body.games;
}

export async function startSession(gameId: string, annotator: string): Promise<SessionView> {
  return postJson<SessionView>('/sessions', { game_id: gameId, annotator });
}

export async function submitAction(
  sessionId: string,
  actionIndex: number,
  step: number
): Promise<SessionView> {
  return postJson<SessionView>(`/sessions/${sessionId}/action`, {
    action_index: actionIndex,
    step,
  });
}

export async function getSession(sessionId: string): Promise<SessionDetail> {
  return getJson<SessionDetail>(`/sessions/${sessionId}`);
}

export async function getSummary(): Promise<SummaryRow[]> {
  const body = await getJson<{ summary: SummaryRow[] }>('/summary');
  return body.summary;
}
