export type Verdict = "phishing" | "safe";

export type ClassifyOutcome =
  | { kind: "ok"; verdict: Verdict; score: number }
  | { kind: "unreachable"; detail: string }
  | { kind: "invalid"; detail: string };

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const isRecord = (value: unknown): value is Record<string, unknown> =>
  typeof value === "object" && value !== null;

const errorDetail = (payload: unknown): string | null => {
  if (!isRecord(payload) || !isRecord(payload.error)) return null;
  const { code, message } = payload.error;
  if (typeof message !== "string") return null;
  return typeof code === "string" ? `${code}: ${message}` : message;
};

export async function classifyTweet(
  apiBaseUrl: string,
  tweetId: string,
  fetchImpl: FetchLike,
): Promise<ClassifyOutcome> {
  let response: Response;
  try {
    response = await fetchImpl(`${apiBaseUrl}/v1/classify`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ tweet_id: tweetId }),
    });
  } catch (error) {
    const detail = error instanceof Error ? error.message : String(error);
    return { kind: "unreachable", detail };
  }

  let payload: unknown;
  try {
    payload = await response.json();
  } catch {
    return { kind: "invalid", detail: `non-JSON body (HTTP ${response.status})` };
  }

  if (!response.ok) {
    return { kind: "invalid", detail: errorDetail(payload) ?? `HTTP ${response.status}` };
  }
  if (
    !isRecord(payload) ||
    (payload.verdict !== "phishing" && payload.verdict !== "safe") ||
    typeof payload.score !== "number"
  ) {
    return { kind: "invalid", detail: "response is missing a usable verdict" };
  }
  return { kind: "ok", verdict: payload.verdict, score: payload.score };
}
