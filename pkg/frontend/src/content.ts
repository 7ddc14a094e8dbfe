import { scanAndAnnotate } from "./annotator";

const DEFAULT_API_BASE = "http://127.0.0.1:8000";

const apiBase = () =>
  document.querySelector<HTMLMetaElement>('meta[name="phishscan-api"]')?.content ||
  DEFAULT_API_BASE;

const boot = () => {
  scanAndAnnotate(document, apiBase());
};

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot, { once: true });
} else {
  boot();
}
