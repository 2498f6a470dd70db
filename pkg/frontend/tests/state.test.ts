// Card lifecycle and session persistence.

import { describe, expect, it } from "vitest";

import { QueryResponseSchema } from "../src/api.js";
import {
  canGiveFeedback,
  canSubmit,
  SessionStore,
  STORAGE_KEY,
  type StorageLike,
} from "../src/state.js";
import { cannedResponse } from "./stub_server.js";

function fakeStorage(): StorageLike & { data: Map<string, string> } {
  const data = new Map<string, string>();
  return {
    data,
    getItem: (key) => data.get(key) ?? null,
    setItem: (key, value) => void data.set(key, value),
  };
}

function answered(store: SessionStore, nl = "top sports by revenue") {
  const card = store.createCard(nl);
  const response = QueryResponseSchema.parse(cannedResponse(nl, "req_1", 11));
  return store.answer(card.id, response);
}

describe("canSubmit", () => {
  it("requires non-blank input", () => {
    expect(canSubmit("")).toBe(false);
    expect(canSubmit("   ")).toBe(false);
    expect(canSubmit("top sports")).toBe(true);
  });
});

describe("SessionStore transitions", () => {
  it("walks pending -> answered -> feedback-given", () => {
    const store = new SessionStore();
    const card = answered(store);
    expect(card.state).toBe("answered");
    const done = store.recordFeedback(card.id, {
      verdict: "accept",
      knowledgeVersion: 12,
      correctedSql: null,
      note: null,
    });
    expect(done.state).toBe("feedback-given");
    expect(done.feedback?.knowledgeVersion).toBe(12);
  });

  it("rejects feedback before an answer arrives", () => {
    const store = new SessionStore();
    const card = store.createCard("anything");
    expect(() =>
      store.recordFeedback(card.id, {
        verdict: "accept",
        knowledgeVersion: 12,
        correctedSql: null,
        note: null,
      }),
    ).toThrow(/pending/);
  });

  it("rejects a second answer for the same card", () => {
    const store = new SessionStore();
    const card = answered(store);
    const response = QueryResponseSchema.parse(cannedResponse("again", "req_2", 11));
    expect(() => store.answer(card.id, response)).toThrow(/answered/);
  });

  it("blocks feedback on failed responses", () => {
    const store = new SessionStore();
    const card = store.createCard("broken question");
    const response = QueryResponseSchema.parse({
      ...cannedResponse("broken question", "req_3", 11),
      status: "failed",
      sql: "",
      error: "model output unparsable after re-ask",
    });
    store.answer(card.id, response);
    expect(canGiveFeedback(store.get(card.id))).toBe(false);
    expect(() =>
      store.recordFeedback(card.id, {
        verdict: "accept",
        knowledgeVersion: 12,
        correctedSql: null,
        note: null,
      }),
    ).toThrow(/runnable/);
  });

  it("retries only from timeout, error, or interrupted", () => {
    const store = new SessionStore();
    const card = store.createCard("slow question");
    store.markTimeout(card.id, "request exceeded 60s budget");
    expect(store.get(card.id).state).toBe("timeout");
    expect(store.retry(card.id).state).toBe("pending");
    store.markError(card.id, "fetch failed");
    expect(store.retry(card.id).state).toBe("pending");
    const done = answered(store);
    expect(() => store.retry(done.id)).toThrow(/answered/);
  });

  it("refuses blank questions and unknown ids", () => {
    const store = new SessionStore();
    expect(() => store.createCard("   ")).toThrow(/non-empty/);
    expect(() => store.get("card_missing")).toThrow(/unknown card/);
  });
});

describe("SessionStore persistence", () => {
  it("round-trips cards through storage", () => {
    const storage = fakeStorage();
    const store = new SessionStore(storage);
    const card = answered(store);
    store.recordFeedback(card.id, {
      verdict: "reject",
      knowledgeVersion: 12,
      correctedSql: "SELECT 2",
      note: "wrong constant",
    });

    const revived = new SessionStore(storage);
    expect(revived.list()).toHaveLength(1);
    const loaded = revived.get(card.id);
    expect(loaded.state).toBe("feedback-given");
    expect(loaded.feedback?.correctedSql).toBe("SELECT 2");
    expect(loaded.response?.request_id).toBe("req_1");
  });

  it("marks reloaded pending cards as interrupted", () => {
    const storage = fakeStorage();
    const store = new SessionStore(storage);
    const card = store.createCard("still running");
    expect(store.get(card.id).state).toBe("pending");

    const revived = new SessionStore(storage);
    const loaded = revived.get(card.id);
    expect(loaded.state).toBe("interrupted");
    expect(loaded.error).toMatch(/reload/);
    expect(revived.retry(card.id).state).toBe("pending");
  });

  it("survives corrupt storage payloads", () => {
    const storage = fakeStorage();
    storage.setItem(STORAGE_KEY, "{not json");
    expect(new SessionStore(storage).list()).toHaveLength(0);
    storage.setItem(STORAGE_KEY, JSON.stringify({ cards: "nope" }));
    expect(new SessionStore(storage).list()).toHaveLength(0);
  });
});
