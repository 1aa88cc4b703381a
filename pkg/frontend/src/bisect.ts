/** Client-side mirror of the server's t0 bisection.
 *
 * Both sides use IEEE doubles and the same midpoint arithmetic, so the local
 * prediction must equal the server's probe bit for bit; the session layer
 * asserts that.
 */

import type { Verdict } from "./types.js";

export interface SearchState {
  lo: number;
  hi: number;
  accepted: boolean;
}

export function initialSearch(): SearchState {
  return { lo: 0.3, hi: 0.6, accepted: false };
}

export function probe(state: SearchState): number {
  return (state.lo + state.hi) / 2;
}

export function applyVerdict(state: SearchState, verdict: Verdict): SearchState {
  if (state.accepted) throw new Error("search already accepted");
  const p = probe(state);
  switch (verdict) {
    case "more_realistic":
      return { lo: p, hi: state.hi, accepted: false };
    case "more_faithful":
      return { lo: state.lo, hi: p, accepted: false };
    case "accept":
      return { ...state, accepted: true };
  }
}
