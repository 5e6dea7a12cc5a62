// Driver for the RP window: opens the login window (the RP /login
// redirect lands it on the issuer page), then relays the negotiation over
// origin-checked postMessage. This script only ever talks HTTP to its own
// origin, so no request toward the issuer can carry an RP Referer.

import { webcryptoRng } from "./group.js";
import {
  Command,
  Input,
  RpScriptContext,
  RpScriptState,
  initialRpState,
  rpScriptStep,
} from "./machines.js";
import { originOf } from "./wire.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

export async function bootRpWindow(): Promise<void> {
  const config = await (await fetch("/config")).json();
  const idpOrigin = originOf(config.idp_script_url);
  const ctx: RpScriptContext = { idpOrigin, rng: webcryptoRng };

  let state: RpScriptState = initialRpState;
  let loginWindow: Window | null = null;

  const feed = async (input: Input): Promise<void> => {
    const [next, commands] = rpScriptStep(state, input, ctx);
    state = next;
    if (state.halt) {
      el("status").textContent =
        `login failed at step ${state.halt.step}: ${state.halt.cause}`;
      return;
    }
    for (const cmd of commands) {
      await runCommand(cmd);
    }
  };

  const runCommand = async (cmd: Command): Promise<void> => {
    switch (cmd.kind) {
      case "openWindow":
        loginWindow = window.open(cmd.url, "sso-login", "width=420,height=520");
        break;
      case "http": {
        const resp = await fetch(cmd.path, {
          method: cmd.method,
          headers: cmd.body !== undefined ? { "Content-Type": "application/json" } : {},
          body: cmd.body !== undefined ? JSON.stringify(cmd.body) : undefined,
        });
        let body: unknown = null;
        try {
          body = await resp.json();
        } catch {
          body = null;
        }
        await feed({ kind: "http", ref: cmd.ref, status: resp.status, body });
        break;
      }
      case "post":
        loginWindow?.postMessage(cmd.content, cmd.targetOrigin ?? "*");
        break;
      case "render":
        el("status").textContent = cmd.html;
        el("login-button").style.display = "none";
        break;
      default:
        break;
    }
  };

  window.addEventListener("message", (event: MessageEvent) => {
    // only the login window this script opened may drive the flow
    if (event.source !== loginWindow) return;
    void feed({ kind: "message", content: event.data ?? {}, origin: event.origin });
  });

  el("login-button").addEventListener("click", () => {
    state = initialRpState;
    void feed({ kind: "self" });
  });
}

if (typeof document !== "undefined" && document.getElementById("rp-demo")) {
  void bootRpWindow();
}
