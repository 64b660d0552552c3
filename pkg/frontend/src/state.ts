/**
 * Client-side session state: per-aspect verdict selection, the reasons rule,
 * and submission gating.
 *
 * Invariants mirrored from the server so bad submissions never go on the
 * wire: reasons are only meaningful for the text aspect with a non-tie
 * verdict, and an aspect can be submitted once a verdict is selected.
 */

import type { AnnotationBody, Aspect, Reason, SessionPayload, Verdict } from './api'
import { ASPECTS } from './api'

export interface AspectState {
  verdict: Verdict | null
  reasons: Set<Reason>
  submitted: boolean
}

export class SessionState {
  readonly aspects = new Map<Aspect, AspectState>()
  freeText = ''

  constructor(readonly session: SessionPayload) {
    for (const aspect of ASPECTS) {
      this.aspects.set(aspect, {
        verdict: null,
        reasons: new Set(),
        submitted: session.done_aspects.includes(aspect),
      })
    }
  }

  private state(aspect: Aspect): AspectState {
    const s = this.aspects.get(aspect)
    if (!s) throw new Error(`unknown aspect ${aspect}`)
    return s
  }

  /** Select a verdict; picking a tie (or any non-text aspect) clears reasons. */
  selectVerdict(aspect: Aspect, verdict: Verdict): void {
    const s = this.state(aspect)
    if (s.submitted) return
    s.verdict = verdict
    if (!this.reasonsAllowed(aspect)) s.reasons.clear()
  }

  /** Reason checkboxes exist only for the text aspect with a non-tie verdict. */
  reasonsAllowed(aspect: Aspect): boolean {
    const s = this.state(aspect)
    return aspect === 'text' && s.verdict !== null && s.verdict !== 'tie'
  }

  toggleReason(aspect: Aspect, reason: Reason): boolean {
    const s = this.state(aspect)
    if (!this.reasonsAllowed(aspect) || s.submitted) return false
    if (s.reasons.has(reason)) s.reasons.delete(reason)
    else s.reasons.add(reason)
    return true
  }

  /** Submit is enabled per aspect only when a verdict is selected. */
  canSubmit(aspect: Aspect): boolean {
    const s = this.state(aspect)
    return s.verdict !== null && !s.submitted
  }

  verdictOf(aspect: Aspect): Verdict | null {
    return this.state(aspect).verdict
  }

  isSubmitted(aspect: Aspect): boolean {
    return this.state(aspect).submitted
  }

  /**
   * Build the POST body for one aspect. Throws before any network call when
   * the reasons rule is violated (ties and image aspects carry no reasons).
   */
  buildSubmission(aspect: Aspect, annotator: string): AnnotationBody {
    const s = this.state(aspect)
    if (s.verdict === null) throw new Error(`no verdict selected for ${aspect}`)
    if (s.reasons.size > 0 && !this.reasonsAllowed(aspect)) {
      throw new Error('reasons are only allowed for a non-tie text verdict')
    }
    return {
      session_id: this.session.session_id,
      task_id: this.session.task_id,
      aspect,
      verdict: s.verdict,
      annotator_id: annotator,
      reasons: [...s.reasons].sort() as Reason[],
      free_text: this.freeText,
    }
  }

  markSubmitted(aspect: Aspect): void {
    this.state(aspect).submitted = true
  }

  /** All three aspects answered; the app may auto-advance. */
  allDone(): boolean {
    return ASPECTS.every((aspect) => this.state(aspect).submitted)
  }

  /** The first unfinished aspect, used as the keyboard target. */
  activeAspect(): Aspect | null {
    return ASPECTS.find((aspect) => !this.state(aspect).submitted) ?? null
  }
}
