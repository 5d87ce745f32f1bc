import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.restoreAllMocks();
});

describe("ApiClient", () => {
  it("prefixes the configured base url", async () => {
    const spy = vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse({ assignments: [] }));
    const client = new ApiClient("http://example.test:9");
    await client.listAssignments();
    expect(spy).toHaveBeenCalledWith("http://example.test:9/api/v1/assignments",
      expect.anything());
  });

  it("posts JSON bodies", async () => {
    const spy = vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse({ state: "TIER2_PENDING", question_id: "q", session: {} }));
    const client = new ApiClient("http://example.test");
    await client.submitTier1("s1", "q1", 2);
    const [, init] = spy.mock.calls[0];
    expect(init?.method).toBe("POST");
    expect(JSON.parse(String(init?.body))).toEqual({ question_id: "q1", choice_index: 2 });
  });

  it("surfaces structured errors as ApiError", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(jsonResponse(
      { code: "wrong_state", message: "explanation not expected", detail: null }, 409));
    const client = new ApiClient("http://example.test");
    const err = await client.submitTier2("s1", "words").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.code).toBe("wrong_state");
  });

  it("wraps network failures", async () => {
    vi.spyOn(globalThis, "fetch").mockRejectedValue(new TypeError("boom"));
    const client = new ApiClient("http://example.test");
    const err = await client.getSession("s1").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("network");
  });
});
