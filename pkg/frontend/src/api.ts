/**
 * Typed client for the annotation service API.
 *
 * The service blinds candidate identities: payloads only ever contain
 * candidate_1 / candidate_2, never method names. Verdicts are submitted
 * relative to candidate 1 (win = candidate 1 better).
 */

export type Aspect = 'text' | 'image' | 't_i'
export type Verdict = 'win' | 'tie' | 'lose'

export const ASPECTS: Aspect[] = ['text', 'image', 't_i']
export const REASONS = ['correctness', 'executability', 'coherence', 'informativeness'] as const
export type Reason = (typeof REASONS)[number]

export interface StepView {
  index: number
  text: string
  image_url: string | null
}

export interface ReferenceView {
  goal_text: string
  steps: { text: string; image_url: string | null }[]
}

export interface SessionPayload {
  session_id: string
  task_id: string
  goal_text: string
  candidate_1: { steps: StepView[] }
  candidate_2: { steps: StepView[] }
  reference: ReferenceView
  aspects: Aspect[]
  done_aspects: Aspect[]
}

export interface AnnotationBody {
  session_id: string
  task_id: string
  aspect: Aspect
  verdict: Verdict
  annotator_id: string
  reasons: Reason[]
  free_text: string
}

export interface ProgressPayload {
  sessions: number
  records: number
  per_annotator: Record<string, number>
  per_aspect: Record<Aspect, number>
  expected_per_annotator: number
}

export interface ReportPayload {
  tallies: Record<Aspect, Record<Verdict, number>>
  kappa: Record<Aspect, number | null>
  raters: number
  complete: boolean
}

/** Error carrying the HTTP status and the server's verbatim detail text. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`)
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>

async function asDetail(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: string }
    return body.detail ?? resp.statusText
  } catch {
    return resp.statusText
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`)
    if (!resp.ok) throw new ApiError(resp.status, await asDetail(resp))
    return (await resp.json()) as T
  }

  /** Next unfinished session for this annotator, or null when the queue is empty. */
  async nextSession(annotator: string): Promise<SessionPayload | null> {
    const data = await this.get<{ session: SessionPayload | null }>(
      `/api/pairs/next?annotator=${encodeURIComponent(annotator)}`,
    )
    return data.session
  }

  /** Submit one aspect verdict; throws ApiError on 400/409 with the server detail. */
  async submitAnnotation(body: AnnotationBody): Promise<void> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/annotations`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    })
    if (!resp.ok) throw new ApiError(resp.status, await asDetail(resp))
  }

  async progress(): Promise<ProgressPayload> {
    return this.get<ProgressPayload>('/api/progress')
  }

  async report(): Promise<ReportPayload> {
    return this.get<ReportPayload>('/api/report')
  }
}
