// Session state for the console. Each submitted question becomes a card;
// cards move pending -> answered -> feedback-given. Failures keep the card
// retryable instead of dropping it.

import type { QueryResponse } from "./api.js";

export type CardState =
  | "pending"
  | "answered"
  | "feedback-given"
  | "timeout"
  | "error"
  | "interrupted";

export interface FeedbackRecord {
  verdict: "accept" | "reject";
  knowledgeVersion: number;
  correctedSql: string | null;
  note: string | null;
}

export interface Card {
  id: string;
  nl: string;
  state: CardState;
  response: QueryResponse | null;
  error: string | null;
  feedback: FeedbackRecord | null;
  createdAt: string;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export const STORAGE_KEY = "ctesql-session";

export function canSubmit(nl: string): boolean {
  return nl.trim().length > 0;
}

// feedback is only meaningful once the server answered with runnable SQL
export function canGiveFeedback(card: Card): boolean {
  return card.state === "answered" && card.response !== null && card.response.status !== "failed";
}

let counter = 0;

function nextId(): string {
  counter += 1;
  return `card_${Date.now().toString(36)}_${counter}`;
}

export class SessionStore {
  private cards: Card[] = [];

  constructor(private readonly storage: StorageLike | null = null) {
    this.restore();
  }

  list(): readonly Card[] {
    return this.cards;
  }

  get(id: string): Card {
    const card = this.cards.find((c) => c.id === id);
    if (!card) {
      throw new Error(`unknown card: ${id}`);
    }
    return card;
  }

  createCard(nl: string): Card {
    if (!canSubmit(nl)) {
      throw new Error("question must be non-empty");
    }
    const card: Card = {
      id: nextId(),
      nl: nl.trim(),
      state: "pending",
      response: null,
      error: null,
      feedback: null,
      createdAt: new Date().toISOString(),
    };
    this.cards.push(card);
    this.persist();
    return card;
  }

  answer(id: string, response: QueryResponse): Card {
    const card = this.get(id);
    this.expect(card, ["pending"], "answer");
    card.state = "answered";
    card.response = response;
    card.error = null;
    this.persist();
    return card;
  }

  markTimeout(id: string, message: string): Card {
    const card = this.get(id);
    this.expect(card, ["pending"], "markTimeout");
    card.state = "timeout";
    card.error = message;
    this.persist();
    return card;
  }

  markError(id: string, message: string): Card {
    const card = this.get(id);
    this.expect(card, ["pending"], "markError");
    card.state = "error";
    card.error = message;
    this.persist();
    return card;
  }

  retry(id: string): Card {
    const card = this.get(id);
    this.expect(card, ["timeout", "error", "interrupted"], "retry");
    card.state = "pending";
    card.error = null;
    this.persist();
    return card;
  }

  recordFeedback(id: string, feedback: FeedbackRecord): Card {
    const card = this.get(id);
    this.expect(card, ["answered"], "recordFeedback");
    if (!canGiveFeedback(card)) {
      throw new Error("feedback requires an answered card with runnable SQL");
    }
    card.state = "feedback-given";
    card.feedback = feedback;
    this.persist();
    return card;
  }

  private expect(card: Card, allowed: CardState[], action: string): void {
    if (!allowed.includes(card.state)) {
      throw new Error(`cannot ${action} a ${card.state} card`);
    }
  }

  private persist(): void {
    if (this.storage) {
      this.storage.setItem(STORAGE_KEY, JSON.stringify(this.cards));
    }
  }

  private restore(): void {
    if (!this.storage) {
      return;
    }
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) {
      return;
    }
    try {
      const parsed: unknown = JSON.parse(raw);
      if (!Array.isArray(parsed)) {
        return;
      }
      this.cards = parsed as Card[];
    } catch {
      return;
    }
    // in-flight requests did not survive the reload
    for (const card of this.cards) {
      if (card.state === "pending") {
        card.state = "interrupted";
        card.error = "request interrupted by page reload";
      }
    }
    this.persist();
  }
}
