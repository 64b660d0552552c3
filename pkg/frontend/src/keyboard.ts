/**
 * Keyboard shortcuts for annotation throughput: 1 / 2 / 0 select
 * win-left / win-right / tie for the first unfinished aspect, Enter submits
 * it. Keys are ignored while typing in the observations field.
 */

import type { Aspect, Verdict } from './api'

export interface KeyboardHandlers {
  onVerdict: (aspect: Aspect, verdict: Verdict) => void
  onSubmit: (aspect: Aspect) => void
  activeAspect: () => Aspect | null
}

const KEY_VERDICTS: Record<string, Verdict> = {
  '1': 'win',
  '2': 'lose',
  '0': 'tie',
}

export function handleKey(event: KeyboardEvent, handlers: KeyboardHandlers): boolean {
  const target = event.target as HTMLElement | null
  if (target && (target.tagName === 'TEXTAREA' || target.tagName === 'INPUT')) {
    return false
  }
  const aspect = handlers.activeAspect()
  if (aspect === null) return false
  const verdict = KEY_VERDICTS[event.key]
  if (verdict !== undefined) {
    handlers.onVerdict(aspect, verdict)
    return true
  }
  if (event.key === 'Enter') {
    handlers.onSubmit(aspect)
    return true
  }
  return false
}

export function installKeyboard(handlers: KeyboardHandlers): () => void {
  const listener = (event: KeyboardEvent) => {
    if (handleKey(event, handlers)) event.preventDefault()
  }
  document.addEventListener('keydown', listener)
  return () => document.removeEventListener('keydown', listener)
}
