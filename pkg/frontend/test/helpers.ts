import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8")) as T;
}

/** An ApiClient fetch stub serving canned bodies keyed by path prefix. */
export function fetchStub(routes: Record<string, unknown>, calls?: string[]) {
  return async (input: string, init?: RequestInit): Promise<Response> => {
    calls?.push(`${init?.method ?? "GET"} ${input}`);
    for (const [prefix, body] of Object.entries(routes)) {
      if (input.startsWith(prefix)) {
        return new Response(JSON.stringify(body), {
          status: 200,
          headers: { "content-type": "application/json" },
        });
      }
    }
    return new Response(JSON.stringify({ code: "not-found", message: `no route ${input}` }), {
      status: 404,
      headers: { "content-type": "application/json" },
    });
  };
}
