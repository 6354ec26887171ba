import { afterEach, describe, expect, it, vi } from 'vitest';

import { StaleActionError, listGames, submitAction } from '../src/api';

afterEach(() => {
  vi.unstubAllGlobals();
});

describe('api client', () => {
  it('lists games', async () => {
    vi.stubGlobal(
      'fetch',
      vi.fn(async () =>
        new Response(
          JSON.stringify({
            games: [{ id: 'easy_0', difficulty: 'easy', split: 'train', optimal_steps: 2 }],
          })
        )
      )
    );
    const games = await listGames();
    expect(games).toHaveLength(1);
    expect(games[0].optimal_steps).toBe(2);
  });

  it('maps 409 to StaleActionError', async () => {
    vi.stubGlobal(
      'fetch',
      vi.fn(async () =>
        new Response(JSON.stringify({ detail: 'stale action: session is at step 3' }), {
          status: 409,
        })
      )
    );
    await expect(submitAction('s', 0, 1)).rejects.toBeInstanceOf(StaleActionError);
  });

  it('raises on other failures', async () => {
    vi.stubGlobal('fetch', vi.fn(async () => new Response('nope', { status: 500 })));
    await expect(submitAction('s', 0, 1)).rejects.toThrow('500');
  });

  it('sends the step nonce with every action', async () => {
    const fetchMock = vi.fn(async () =>
      new Response(JSON.stringify({ session_id: 's' }), { status: 200 })
    );
    vi.stubGlobal('fetch', fetchMock);
    await submitAction('s', 4, 7);
    const [, init] = fetchMock.mock.calls[0] as [string, RequestInit];
    expect(JSON.parse(String(init.body))).toEqual({ action_index: 4, step: 7 });
  });
});
