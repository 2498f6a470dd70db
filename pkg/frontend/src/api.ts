// Typed client for the /v1 JSON API. All payloads are validated at the
// boundary; the console holds no business logic of its own.

import { z } from "zod";

export const PlanStepSchema = z.object({
  description: z.string(),
  pseudo_sql: z.string().nullable(),
  refs: z.array(z.string()),
});

const RankedSchema = z.array(z.tuple([z.string(), z.number()]));

export const QueryResponseSchema = z.object({
  request_id: z.string(),
  nl: z.string(),
  reformulated: z.string(),
  intent: z.string(),
  sql: z.string(),
  plan: z.array(PlanStepSchema),
  retrieval: z.object({
    examples: RankedSchema,
    instructions: RankedSchema,
  }),
  status: z.enum(["clean", "corrected", "exhausted", "failed"]),
  rounds_used: z.number(),
  columns: z.array(z.string()),
  preview: z.array(z.array(z.unknown())),
  history: z.array(
    z.object({
      sql: z.string(),
      feedback: z.array(
        z.object({
          kind: z.string(),
          message: z.string(),
          criterion: z.string().nullable(),
        }),
      ),
    }),
  ),
  timings: z.array(
    z.object({
      stage: z.string(),
      seconds: z.number(),
      degraded: z.boolean(),
    }),
  ),
  model_calls: z.number(),
  knowledge_version: z.number(),
  error: z.string().nullable(),
});

// requests past their server-side budget come back as a two-field stub
export const TimeoutResponseSchema = z.object({
  status: z.literal("timeout"),
  error: z.string(),
});

export const KnowledgeSummarySchema = z.object({
  version: z.number(),
  examples: z.number(),
  instructions: z.number(),
  tables: z.array(z.string()),
  partitions: z.record(z.string(), z.number()),
});

export const RequestRecordSchema = z.object({
  request_id: z.string(),
  nl: z.string(),
  reformulated: z.string(),
  intent: z.string(),
  example_ids: z.array(z.string()),
  instruction_ids: z.array(z.string()),
  sql: z.string(),
  status: z.string(),
  knowledge_version: z.number(),
  created_at: z.string(),
});

export type QueryResponse = z.infer<typeof QueryResponseSchema>;
export type TimeoutResponse = z.infer<typeof TimeoutResponseSchema>;
export type QueryOutcome =
  | { kind: "answered"; response: QueryResponse }
  | { kind: "timeout"; error: string };
export type KnowledgeSummary = z.infer<typeof KnowledgeSummarySchema>;
export type RequestRecord = z.infer<typeof RequestRecordSchema>;

export interface FeedbackBody {
  request_id: string;
  verdict: "accept" | "reject";
  corrected_sql?: string | null;
  note?: string | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorText(response: Response): Promise<string> {
  try {
    const body: unknown = await response.json();
    if (body && typeof body === "object" && "error" in body) {
      return String((body as { error: unknown }).error);
    }
    return JSON.stringify(body);
  } catch {
    return response.statusText || `HTTP ${response.status}`;
  }
}

export class ApiClient {
  // browsers require fetch to be invoked on the global, so keep a wrapper
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = (input, init) => fetch(input, init),
  ) {}

  private async getJson(path: string): Promise<unknown> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) {
      throw new ApiError(response.status, await errorText(response));
    }
    return response.json();
  }

  private async postJson(path: string, body: unknown): Promise<unknown> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorText(response));
    }
    return response.json();
  }

  async submitQuery(nl: string): Promise<QueryOutcome> {
    const payload = await this.postJson("/v1/query", { nl });
    const timeout = TimeoutResponseSchema.safeParse(payload);
    if (timeout.success) {
      return { kind: "timeout", error: timeout.data.error };
    }
    return { kind: "answered", response: QueryResponseSchema.parse(payload) };
  }

  async sendFeedback(body: FeedbackBody): Promise<number> {
    const payload = await this.postJson("/v1/feedback", body);
    return z.object({ knowledge_version: z.number() }).parse(payload).knowledge_version;
  }

  async fetchSummary(): Promise<KnowledgeSummary> {
    return KnowledgeSummarySchema.parse(await this.getJson("/v1/knowledge/summary"));
  }

  async fetchRequest(requestId: string): Promise<RequestRecord> {
    return RequestRecordSchema.parse(
      await this.getJson(`/v1/requests/${encodeURIComponent(requestId)}`),
    );
  }

  async health(): Promise<{ status: string; knowledge_version: number }> {
    return z
      .object({ status: z.string(), knowledge_version: z.number() })
      .parse(await this.getJson("/healthz"));
  }
}
