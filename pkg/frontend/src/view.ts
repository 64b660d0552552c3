/**
 * DOM rendering for the annotation tool: two blinded candidate columns, the
 * reference article panel, per-aspect win/tie/lose controls with reason
 * checkboxes for the text aspect, a free-text field, and a completion screen.
 */

import type { Aspect, ProgressPayload, Reason, SessionPayload, Verdict } from './api'
import { ASPECTS, REASONS } from './api'
import type { SessionState } from './state'

const ASPECT_LABELS: Record<Aspect, string> = {
  text: 'Textual Quality',
  image: 'Visual Coherence',
  t_i: 'Text-Image Alignment',
}

const VERDICT_LABELS: Record<Verdict, string> = {
  win: 'Candidate 1 better',
  tie: 'Tie',
  lose: 'Candidate 2 better',
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (className) node.className = className
  if (text !== undefined) node.textContent = text
  return node
}

function stepImage(url: string | null): HTMLElement {
  if (url === null) {
    return el('div', 'step-image placeholder', 'no image')
  }
  const img = el('img', 'step-image') as HTMLImageElement
  img.src = url
  img.alt = 'step image'
  // A missing blob degrades to a placeholder; the session stays annotatable.
  img.onerror = () => {
    const fallback = el('div', 'step-image placeholder', 'image unavailable')
    img.replaceWith(fallback)
  }
  return img
}

function candidateColumn(title: string, steps: SessionPayload['candidate_1']['steps']): HTMLElement {
  const column = el('section', 'candidate')
  column.append(el('h2', undefined, title))
  for (const step of steps) {
    const card = el('div', 'step')
    card.append(el('div', 'step-title', `Step ${step.index}`))
    card.append(stepImage(step.image_url))
    card.append(el('p', 'step-text', step.text))
    column.append(card)
  }
  return column
}

function referencePanel(reference: SessionPayload['reference']): HTMLElement {
  const panel = el('aside', 'reference')
  panel.append(el('h2', undefined, 'Reference article'))
  panel.append(el('p', 'reference-goal', reference.goal_text))
  for (const [i, step] of reference.steps.entries()) {
    const card = el('div', 'step')
    card.append(el('div', 'step-title', `Step ${i + 1}`))
    if (step.image_url) card.append(stepImage(step.image_url))
    card.append(el('p', 'step-text', step.text))
    panel.append(card)
  }
  return panel
}

export interface ViewHandlers {
  onVerdict: (aspect: Aspect, verdict: Verdict) => void
  onReason: (aspect: Aspect, reason: Reason) => void
  onFreeText: (text: string) => void
  onSubmit: (aspect: Aspect) => void
}

function aspectControls(state: SessionState, aspect: Aspect, handlers: ViewHandlers): HTMLElement {
  const box = el('fieldset', 'aspect')
  box.dataset.aspect = aspect
  box.append(el('legend', undefined, ASPECT_LABELS[aspect]))

  const verdicts = el('div', 'verdicts')
  for (const verdict of ['win', 'tie', 'lose'] as Verdict[]) {
    const button = el('button', 'verdict', VERDICT_LABELS[verdict])
    button.dataset.verdict = verdict
    button.type = 'button'
    if (state.verdictOf(aspect) === verdict) button.classList.add('selected')
    button.disabled = state.isSubmitted(aspect)
    button.onclick = () => handlers.onVerdict(aspect, verdict)
    verdicts.append(button)
  }
  box.append(verdicts)

  if (state.reasonsAllowed(aspect)) {
    const reasonBox = el('div', 'reasons')
    reasonBox.append(el('span', 'reasons-hint', 'Why not a tie?'))
    for (const reason of REASONS) {
      const label = el('label', 'reason')
      const input = el('input') as HTMLInputElement
      input.type = 'checkbox'
      input.value = reason
      input.checked = state.aspects.get(aspect)!.reasons.has(reason)
      input.disabled = state.isSubmitted(aspect)
      input.onchange = () => handlers.onReason(aspect, reason)
      label.append(input, document.createTextNode(reason))
      reasonBox.append(label)
    }
    box.append(reasonBox)
  }

  const submit = el('button', 'submit')
  submit.type = 'button'
  submit.textContent = state.isSubmitted(aspect) ? 'Submitted' : 'Submit'
  submit.disabled = !state.canSubmit(aspect)
  submit.onclick = () => handlers.onSubmit(aspect)
  box.append(submit)
  return box
}

/** Render one session; returns nothing, the root is replaced wholesale. */
export function renderSession(
  root: HTMLElement,
  state: SessionState,
  handlers: ViewHandlers,
  banner?: string,
): void {
  root.replaceChildren()
  const session = state.session

  if (banner) root.append(el('div', 'banner error', banner))
  root.append(el('h1', 'goal', `Goal: ${session.goal_text}`))

  const columns = el('div', 'columns')
  columns.append(candidateColumn('Candidate 1', session.candidate_1.steps))
  columns.append(candidateColumn('Candidate 2', session.candidate_2.steps))
  columns.append(referencePanel(session.reference))
  root.append(columns)

  const controls = el('form', 'controls')
  controls.onsubmit = (e) => e.preventDefault()
  for (const aspect of ASPECTS) {
    controls.append(aspectControls(state, aspect, handlers))
  }
  const notes = el('label', 'free-text')
  notes.append(document.createTextNode('Observations'))
  const textarea = el('textarea') as HTMLTextAreaElement
  textarea.value = state.freeText
  textarea.placeholder = 'Anything odd about either plan?'
  textarea.oninput = () => handlers.onFreeText(textarea.value)
  notes.append(textarea)
  controls.append(notes)
  root.append(controls)
}

export function renderDone(root: HTMLElement, progress: ProgressPayload, annotator: string): void {
  root.replaceChildren()
  const doneCount = progress.per_annotator[annotator] ?? 0
  root.append(el('h1', 'done-title', 'All sessions annotated'))
  root.append(
    el(
      'p',
      'done-progress',
      `You submitted ${doneCount} of ${progress.expected_per_annotator} aspect verdicts ` +
        `across ${progress.sessions} sessions. Thank you!`,
    ),
  )
}

export function renderFatal(root: HTMLElement, message: string, onRetry: () => void): void {
  root.replaceChildren()
  const banner = el('div', 'banner error', `Cannot reach the annotation service: ${message}`)
  const retry = el('button', 'retry', 'Retry')
  retry.type = 'button'
  retry.onclick = onRetry
  banner.append(retry)
  root.append(banner)
}
