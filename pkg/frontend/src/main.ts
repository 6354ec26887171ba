import { getSummary } from './api';
import { PlayScreen, el, renderAttention, renderGameList, renderSummaryTable } from './ui';
import type { AttentionExport } from './types';

function tabBar(onSelect: (tab: string) => void): HTMLElement {
  const bar = el('nav', { class: 'tabs' });
  for (const tab of ['play', 'summary', 'attention']) {
    const button = el('button', { 'data-tab': tab }, [tab]);
    button.addEventListener('click', () => onSelect(tab));
    bar.append(button);
  }
  return bar;
}

async function showPlay(content: HTMLElement): Promise<void> {
  const annotatorInput = el('input', {
    id: 'annotator',
    placeholder: 'your name',
    value: localStorage.getItem('annotator') ?? '',
  });
  const picker = el('div', {});
  const playRoot = el('div', { id: 'play-root' });
  content.replaceChildren(
    el('label', {}, ['Annotator: ', annotatorInput]),
    picker,
    playRoot
  );
  const screen = new PlayScreen(playRoot);
  await renderGameList(picker, (gameId) => {
    const annotator = annotatorInput.value.trim() || 'anonymous';
    localStorage.setItem('annotator', annotator);
    void screen.start(gameId, annotator);
  });
}

async function showSummary(content: HTMLElement): Promise<void> {
  renderSummaryTable(content, await getSummary());
}

function showAttention(content: HTMLElement): void {
  const input = el('input', { type: 'file', accept: '.json' }) as HTMLInputElement;
  const viewer = el('div', { id: 'attention-root' });
  input.addEventListener('change', () => {
    const file = input.files?.[0];
    if (!file) return;
    void file.text().then((text) => {
      renderAttention(viewer, JSON.parse(text) as AttentionExport);
    });
  });
  content.replaceChildren(
    el('p', {}, ['Load an attention export produced by the attn command:']),
    input,
    viewer
  );
}

export function boot(root: HTMLElement): void {
  const content = el('main', { id: 'content' });
  const bar = tabBar((tab) => {
    if (tab === 'play') void showPlay(content);
    else if (tab === 'summary') void showSummary(content);
    else showAttention(content);
  });
  root.replaceChildren(el('h1', {}, ['House cleanup games']), bar, content);
  void showPlay(content);
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  boot(document.getElementById('app') as HTMLElement);
}
