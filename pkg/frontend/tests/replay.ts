// Replay transport: serves the recorded service exchanges, in order. Each
// fetch must match the method and path of the next recorded exchange, so the
// tests prove that the client issues exactly the request sequence the real
// service saw when the fixture was recorded.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { FetchLike } from "../src/api";

interface Exchange {
  method: string;
  path: string;
  status: number;
  response: unknown;
  truncated?: boolean;
}

export interface Recorded {
  inputs: {
    stroke_px: [number, number][];
    stroke_scale: number;
    lift: { amplitude: number; period: number; noise_amplitude: number; seed: number };
    drag: { anchor: number; displacement: [number, number, number]; falloff: number };
    noop_drag: { anchor: number; displacement: [number, number, number]; falloff: number };
    config: Record<string, unknown>;
  };
  exchanges: Exchange[];
}

export function loadRecorded(): Recorded {
  const here = dirname(fileURLToPath(import.meta.url));
  return JSON.parse(readFileSync(join(here, "fixtures", "recorded.json"), "utf-8"));
}

export interface ReplayTransport {
  fetch: FetchLike;
  requests: { method: string; path: string; body: unknown }[];
  remaining(): number;
}

export function replayTransport(exchanges: Exchange[]): ReplayTransport {
  let cursor = 0;
  const requests: ReplayTransport["requests"] = [];

  const fetchImpl: FetchLike = async (input, init) => {
    const method = init?.method ?? "GET";
    const expected = exchanges[cursor];
    if (!expected) {
      throw new Error(`unexpected request beyond the recording: ${method} ${input}`);
    }
    if (expected.method !== method || expected.path !== input) {
      throw new Error(
        `request #${cursor}: got ${method} ${input}, recorded ${expected.method} ${expected.path}`,
      );
    }
    cursor += 1;
    requests.push({
      method,
      path: input,
      body: init?.body ? JSON.parse(init.body as string) : null,
    });
    const payload = expected.response;
    const body = typeof payload === "string" ? payload : JSON.stringify(payload);
    return new Response(body, {
      status: expected.status,
      headers: { "content-type": typeof payload === "string" ? "text/plain" : "application/json" },
    });
  };

  return { fetch: fetchImpl, requests, remaining: () => exchanges.length - cursor };
}
