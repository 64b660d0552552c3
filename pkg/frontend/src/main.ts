/** Browser entry point: annotator id from the query string or a prompt. */

import { ApiClient } from './api'
import { App } from './app'

function annotatorId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('annotator')
  if (fromQuery) return fromQuery
  const answered = window.prompt('Annotator id?')?.trim()
  return answered || 'anonymous'
}

const root = document.getElementById('app')
if (!root) throw new Error('missing #app mount point')
const app = new App(root, new ApiClient(''), annotatorId())
void app.start()
