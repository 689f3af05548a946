// Event-stream consumer: one long-lived JSON-lines connection with resume.
// Reconnects resume from the last seen sequence number, so no event is ever
// lost or double-applied across connection drops.

export interface StreamEvent {
  seq: number;
  kind: string;
  [key: string]: unknown;
}

export class LineSplitter {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const parts = this.buffer.split("\n");
    this.buffer = parts.pop() ?? "";
    return parts.filter((line) => line.length > 0);
  }
}

export type StreamStatus = "connecting" | "connected" | "disconnected";

export class EventFeed {
  cursor = 0;
  private running = false;
  private retryMs: number;

  constructor(
    private base: string,
    private onEvent: (event: StreamEvent) => void,
    private onStatus: (status: StreamStatus) => void = () => {},
    retryMs = 1000,
  ) {
    this.retryMs = retryMs;
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    void this.loop();
  }

  stop(): void {
    this.running = false;
  }

  private async loop(): Promise<void> {
    while (this.running) {
      this.onStatus("connecting");
      try {
        const response = await fetch(`${this.base}/events?since=${this.cursor}`);
        if (!response.ok || !response.body) {
          throw new Error(`stream status ${response.status}`);
        }
        this.onStatus("connected");
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const splitter = new LineSplitter();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          for (const line of splitter.push(decoder.decode(value, { stream: true }))) {
            const event = JSON.parse(line) as StreamEvent;
            this.cursor = event.seq;
            this.onEvent(event);
          }
          if (!this.running) {
            await reader.cancel();
            return;
          }
        }
      } catch {
        // fall through to retry
      }
      if (!this.running) return;
      this.onStatus("disconnected");
      await new Promise((resolve) => setTimeout(resolve, this.retryMs));
    }
  }
}
