/**
 * DOM views: game picker, play screen with the full admissible drop-down,
 * completion banner, summary table, and the attention viewer.
 *
 * Input is disabled while a request is in flight; the action list always
 * mirrors the server's admissible list in the server's order.
 */

import { getSession, listGames, startSession, submitAction, StaleActionError } from './api';
import {
  applyResponse,
  ClientSession,
  completionLabel,
  freshSession,
  normalizedScore,
  refreshView,
} from './state';
import type { AttentionExport, SummaryRow } from './types';

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = []
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === 'class') node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export async function renderGameList(root: HTMLElement, onPick: (id: string) => void) {
  const games = await listGames();
  const list = el('div', { class: 'game-list' });
  for (const game of games) {
    const button = el('button', { class: 'game-pick', 'data-game': game.id }, [
      `${game.id}  [${game.difficulty}/${game.split}]  optimal ${game.optimal_steps}`,
    ]);
    button.addEventListener('click', () => onPick(game.id));
    list.append(button);
  }
  root.replaceChildren(el('h2', {}, ['Pick a game']), list);
}

export class PlayScreen {
  session: ClientSession | null = null;
  private root: HTMLElement;

  constructor(root: HTMLElement) {
    this.root = root;
  }

  async start(gameId: string, annotator: string): Promise<void> {
    const view = await startSession(gameId, annotator);
    this.session = freshSession(view);
    this.render();
  }

  async resume(sessionId: string): Promise<void> {
    const detail = await getSession(sessionId);
    this.session = freshSession(detail);
    this.render();
  }

  async submitSelected(index: number): Promise<void> {
    if (!this.session || this.session.busy || this.session.view.done) return;
    const action = this.session.view.admissible[index];
    if (action === undefined) return;
    this.session = { ...this.session, busy: true };
    this.render();
    try {
      const response = await submitAction(
        this.session.view.session_id,
        index,
        this.session.view.step
      );
      this.session = applyResponse(this.session, action, response);
    } catch (error) {
      if (error instanceof StaleActionError) {
        const detail = await getSession(this.session.view.session_id);
        this.session = refreshView(this.session, detail);
      } else {
        this.session = { ...this.session, busy: false };
        this.render();
        throw error;
      }
    }
    this.render();
  }

  render(): void {
    if (!this.session) return;
    const { view, transcript, busy } = this.session;
    const observation = el('pre', { class: 'observation' }, [view.observation]);
    const status = el('div', { class: 'status' }, [
      `score ${view.score} / ${view.max_score}   step ${view.step}`,
    ]);

    const select = el('select', { class: 'actions', size: '8' });
    view.admissible.forEach((text, index) => {
      select.append(el('option', { value: String(index) }, [text]));
    });
    if (view.admissible.length > 0) select.value = '0';
    const go = el('button', { class: 'submit' }, ['Do it']);
    if (busy || view.done) {
      select.setAttribute('disabled', 'true');
      go.setAttribute('disabled', 'true');
    }
    go.addEventListener('click', () => {
      void this.submitSelected(Number(select.value));
    });
    select.addEventListener('dblclick', () => {
      void this.submitSelected(Number(select.value));
    });

    const history = el(
      'ol',
      { class: 'transcript' },
      transcript.map((entry) =>
        el('li', {}, [
          `${entry.action}${entry.reward > 0 ? `  (+${entry.reward})` : ''}`,
        ])
      )
    );

    const children: (Node | string)[] = [observation, status];
    if (view.done) {
      children.push(
        el('div', { class: 'completion' }, [
          `Done! Normalized score ${normalizedScore(view).toFixed(1)} - `,
          el('span', { class: 'steps-vs-optimal' }, [completionLabel(view)]),
        ])
      );
    } else {
      children.push(select, go);
    }
    children.push(el('h3', {}, ['Moves']), history);
    this.root.replaceChildren(...children);
  }
}

export function renderSummaryTable(root: HTMLElement, rows: SummaryRow[]): void {
  const header = el('tr', {}, []);
  for (const column of ['annotator', 'difficulty', 'games', 'mean steps', 'mean score']) {
    header.append(el('th', {}, [column]));
  }
  const table = el('table', { class: 'summary' }, [header]);
  for (const row of rows) {
    table.append(
      el('tr', {}, [
        el('td', {}, [row.annotator]),
        el('td', {}, [row.difficulty]),
        el('td', {}, [String(row.games)]),
        el('td', {}, [row.mean_steps.toFixed(2)]),
        el('td', {}, [row.mean_score.toFixed(2)]),
      ])
    );
  }
  root.replaceChildren(el('h2', {}, ['Human play summary']), table);
}

export function renderAttention(root: HTMLElement, data: AttentionExport): void {
  const sections: Node[] = [el('h2', {}, ['Agent attention over the concept graph'])];
  for (const step of data.steps) {
    const block = el('div', { class: 'attention-step' }, [
      el('h3', {}, [`t=${step.t}${step.action_taken ? `  took: ${step.action_taken}` : ''}`]),
    ]);
    for (const [action, weights] of Object.entries(step.weights_per_action)) {
      const row = el('div', { class: 'attention-row' }, [
        el('div', { class: 'attention-action' }, [action]),
      ]);
      weights.forEach((weight, index) => {
        const bar = el('div', { class: 'bar' }, [
          el('span', { class: 'bar-label' }, [step.nodes[index] ?? `#${index}`]),
        ]);
        const fill = el('div', { class: 'bar-fill' });
        fill.style.width = `${Math.round(weight * 100)}%`;
        fill.title = weight.toFixed(3);
        bar.append(fill);
        row.append(bar);
      });
      block.append(row);
    }
    sections.push(block);
  }
  root.replaceChildren(...sections);
}
