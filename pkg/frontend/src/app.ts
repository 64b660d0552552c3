/**
 * Application controller: fetches sessions, routes UI events into the
 * session state, submits aspect verdicts, and advances when all three
 * aspects are done.
 *
 * Server errors surface verbatim in a banner; a 409 (already recorded)
 * reconciles the aspect to the done state instead of double counting.
 */

import { ApiClient, ApiError } from './api'
import type { Aspect, Reason, Verdict } from './api'
import { installKeyboard } from './keyboard'
import { SessionState } from './state'
import { renderDone, renderFatal, renderSession } from './view'

export class App {
  private state: SessionState | null = null
  private banner = ''
  private removeKeyboard: (() => void) | null = null

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly annotator: string,
  ) {}

  async start(): Promise<void> {
    this.removeKeyboard ??= installKeyboard({
      onVerdict: (aspect, verdict) => this.selectVerdict(aspect, verdict),
      onSubmit: (aspect) => void this.submit(aspect),
      activeAspect: () => this.state?.activeAspect() ?? null,
    })
    await this.advance()
  }

  stop(): void {
    this.removeKeyboard?.()
    this.removeKeyboard = null
  }

  current(): SessionState | null {
    return this.state
  }

  private async advance(): Promise<void> {
    try {
      const session = await this.api.nextSession(this.annotator)
      if (session === null) {
        this.state = null
        renderDone(this.root, await this.api.progress(), this.annotator)
        return
      }
      this.state = new SessionState(session)
      this.banner = ''
      this.render()
    } catch (err) {
      renderFatal(this.root, err instanceof Error ? err.message : String(err), () =>
        void this.advance(),
      )
    }
  }

  private render(): void {
    if (!this.state) return
    renderSession(
      this.root,
      this.state,
      {
        onVerdict: (aspect, verdict) => this.selectVerdict(aspect, verdict),
        onReason: (aspect, reason) => this.toggleReason(aspect, reason),
        onFreeText: (text) => {
          if (this.state) this.state.freeText = text
        },
        onSubmit: (aspect) => void this.submit(aspect),
      },
      this.banner,
    )
  }

  selectVerdict(aspect: Aspect, verdict: Verdict): void {
    this.state?.selectVerdict(aspect, verdict)
    this.render()
  }

  toggleReason(aspect: Aspect, reason: Reason): void {
    this.state?.toggleReason(aspect, reason)
    this.render()
  }

  /** Submit one aspect; on success (or 409) lock it and advance when all done. */
  async submit(aspect: Aspect): Promise<void> {
    if (!this.state || !this.state.canSubmit(aspect)) return
    let body
    try {
      body = this.state.buildSubmission(aspect, this.annotator)
    } catch (err) {
      // blocked client-side before any network call (e.g. reasons on a tie)
      this.banner = err instanceof Error ? err.message : String(err)
      this.render()
      return
    }
    try {
      await this.api.submitAnnotation(body)
      this.state.markSubmitted(aspect)
      this.banner = ''
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // already recorded server-side: reconcile, do not double count
        this.state.markSubmitted(aspect)
        this.banner = ''
      } else {
        this.banner = err instanceof Error ? err.message : String(err)
        this.render()
        return
      }
    }
    if (this.state.allDone()) {
      await this.advance()
    } else {
      this.render()
    }
  }
}
