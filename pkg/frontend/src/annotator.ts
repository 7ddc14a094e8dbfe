import { classifyTweet, type ClassifyOutcome, type FetchLike } from "./api";

export type AnnotationState = "pending" | "safe" | "phishing" | "error";

export interface AnnotationTarget {
  node: HTMLElement;
  tweetId: string;
  urls: string[];
  state: AnnotationState;
}

export interface AnnotatorOptions {
  fetchImpl?: FetchLike;
  maxConcurrent?: number;
}

export interface Annotator {
  /** URL-bearing tweets discovered so far, keyed by tweet id. */
  readonly targets: ReadonlyMap<string, AnnotationTarget>;
  readonly requestsIssued: number;
  /** Resolves once every queued tweet has a terminal state. */
  settled(): Promise<void>;
  disconnect(): void;
}

export const INDICATOR_CLASS = "phishscan-indicator";

const MAX_CONCURRENT = 6;
const HTTP_URL = /^https?:\/\//i;

const INDICATOR_COLOR: Record<string, string> = {
  phishing: "#c0392b",
  safe: "#27ae60",
  unknown: "#95a5a6",
};

function tweetAnchors(node: HTMLElement): HTMLAnchorElement[] {
  const anchors: HTMLAnchorElement[] = [];
  for (const a of node.querySelectorAll<HTMLAnchorElement>("a[href]")) {
    // getAttribute, not .href: relative links (profile, permalink) are not URLs to scan
    if (HTTP_URL.test(a.getAttribute("href") ?? "")) anchors.push(a);
  }
  return anchors;
}

function renderIndicator(target: AnnotationTarget, verdict: "phishing" | "safe" | "unknown", title: string): void {
  const dot = target.node.ownerDocument.createElement("span");
  dot.className = INDICATOR_CLASS;
  dot.dataset.verdict = verdict;
  dot.textContent = "●";
  dot.title = title;
  dot.setAttribute("role", "img");
  dot.setAttribute("aria-label", title);
  dot.style.color = INDICATOR_COLOR[verdict];
  dot.style.marginLeft = "0.35em";
  const anchor = tweetAnchors(target.node)[0];
  // pure insertion beside the link; existing nodes keep their order
  if (anchor) anchor.after(dot);
  else target.node.appendChild(dot);
}

export function scanAndAnnotate(
  pageRoot: ParentNode,
  apiBaseUrl: string,
  options: AnnotatorOptions = {},
): Annotator {
  const fetchImpl: FetchLike = options.fetchImpl ?? ((input, init) => fetch(input, init));
  const maxConcurrent = options.maxConcurrent ?? MAX_CONCURRENT;

  const seen = new Set<string>();
  const targets = new Map<string, AnnotationTarget>();
  const queue: AnnotationTarget[] = [];
  const idleResolvers: Array<() => void> = [];
  let inflight = 0;
  let frameScheduled = false;
  let requestsIssued = 0;

  const maybeSettle = () => {
    if (queue.length > 0 || inflight > 0) return;
    while (idleResolvers.length > 0) idleResolvers.shift()!();
  };

  const scheduleFrame = () => {
    if (frameScheduled) return;
    frameScheduled = true;
    const raf =
      typeof requestAnimationFrame === "function"
        ? requestAnimationFrame
        : (cb: FrameRequestCallback) => setTimeout(() => cb(0), 16);
    raf(() => {
      frameScheduled = false;
      pump();
    });
  };

  const apply = (target: AnnotationTarget, outcome: ClassifyOutcome) => {
    if (target.state !== "pending") return;
    if (outcome.kind === "ok") {
      target.state = outcome.verdict;
      const title = outcome.verdict === "phishing" ? "flagged as phishing" : "classified as safe";
      renderIndicator(target, outcome.verdict, title);
      return;
    }
    target.state = "error";
    if (outcome.kind === "invalid") {
      console.error(`phishscan: unusable response for tweet ${target.tweetId}: ${outcome.detail}`);
      renderIndicator(target, "unknown", "classifier returned an unusable response");
    } else {
      renderIndicator(target, "unknown", "could not reach the classifier");
    }
  };

  const start = (target: AnnotationTarget) => {
    inflight += 1;
    requestsIssued += 1;
    void classifyTweet(apiBaseUrl, target.tweetId, fetchImpl)
      .then((outcome) => apply(target, outcome))
      .catch((error) => {
        // classifyTweet resolves on every path; guard so a surprise cannot stall the queue
        console.error(`phishscan: annotation failed for tweet ${target.tweetId}`, error);
        target.state = "error";
      })
      .finally(() => {
        inflight -= 1;
        if (queue.length > 0) scheduleFrame();
        maybeSettle();
      });
  };

  const pump = () => {
    while (inflight < maxConcurrent && queue.length > 0) {
      start(queue.shift()!);
    }
    maybeSettle();
  };

  const collect = (root: ParentNode) => {
    const containers: Element[] = [];
    // nodeType check instead of instanceof: content scripts can see nodes from another realm
    if (root.nodeType === 1 && (root as Element).matches("[data-tweet-id]")) {
      containers.push(root as Element);
    }
    containers.push(...root.querySelectorAll("[data-tweet-id]"));
    let queued = false;
    for (const el of containers) {
      const node = el as HTMLElement;
      const tweetId = node.dataset.tweetId ?? "";
      if (!tweetId || seen.has(tweetId)) continue;
      seen.add(tweetId);
      const urls = tweetAnchors(node).map((a) => a.getAttribute("href")!);
      if (urls.length === 0) continue;
      const target: AnnotationTarget = { node, tweetId, urls, state: "pending" };
      targets.set(tweetId, target);
      queue.push(target);
      queued = true;
    }
    if (queued) scheduleFrame();
  };

  const observer = new MutationObserver((records) => {
    for (const record of records) {
      for (const added of record.addedNodes) {
        if (added.nodeType === 1) collect(added as Element);
      }
    }
  });
  observer.observe(pageRoot, { childList: true, subtree: true });
  collect(pageRoot);

  return {
    targets,
    get requestsIssued() {
      return requestsIssued;
    },
    settled: () =>
      new Promise<void>((resolve) => {
        if (queue.length === 0 && inflight === 0) resolve();
        else idleResolvers.push(resolve);
      }),
    disconnect: () => observer.disconnect(),
  };
}
