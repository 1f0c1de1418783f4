import type { Envelope } from "./protocol.js";

/** Builds outgoing envelopes with a strictly increasing seq per connection.
 *  Timestamps come from the injected clock (seconds) and never go backwards,
 *  so the server's replay guarantee holds even if performance.now() stalls. */
export class OutgoingMessages {
  private seq = 0;
  private lastTs = 0;

  constructor(private readonly now: () => number = () => performance.now() / 1000) {}

  envelope(type: string, payload: Record<string, unknown> = {}): Envelope {
    this.seq += 1;
    this.lastTs = Math.max(this.lastTs, this.now());
    return { type, seq: this.seq, timestamp: this.lastTs, payload };
  }

  sessionStart(subject: string, demographics: Record<string, string>): Envelope {
    return this.envelope("session_start", { subject, demographics });
  }

  command(command: string, jumpTo?: number): Envelope {
    const payload: Record<string, unknown> = { command };
    if (jumpTo !== undefined) payload.jump_to = jumpTo;
    return this.envelope("command", payload);
  }

  gazePixels(x: number, y: number): Envelope {
    return this.envelope("gaze_proxy", { x, y });
  }

  trialResponse(response: "match" | "no_match"): Envelope {
    return this.envelope("trial_response", { response });
  }

  questionnaireAnswers(answers: Record<string, unknown>): Envelope {
    return this.envelope("questionnaire_answers", { answers });
  }
}
