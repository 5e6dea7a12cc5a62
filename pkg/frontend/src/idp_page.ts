// Driver for the issuer window: runs the issuer script machine against
// real fetch/postMessage, renders the login form and the consent prompt.
// No request from this window ever targets the RP; the token leaves only
// as a postMessage whose target origin is pinned to the certified
// endpoint's origin.

import { importIssuerKey } from "./crypto.js";
import { groupById, webcryptoRng } from "./group.js";
import {
  Command,
  IdpScriptContext,
  IdpScriptState,
  Input,
  idpScriptStep,
  initialIdpState,
} from "./machines.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

async function runCommands(
  commands: Command[],
  feed: (input: Input) => Promise<void>,
): Promise<void> {
  for (const cmd of commands) {
    switch (cmd.kind) {
      case "http": {
        let url = cmd.path;
        if (cmd.params) url += "?" + new URLSearchParams(cmd.params).toString();
        const resp = await fetch(url, {
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
      case "post": {
        // the partner window is the one that opened this login window
        window.opener?.postMessage(cmd.content, cmd.targetOrigin ?? "*");
        break;
      }
      case "showLogin":
        el("login-form").style.display = "block";
        el("status").textContent = "enter your issuer credentials";
        break;
      case "showConsent":
        el("consent").style.display = "block";
        el("status").textContent = `release ${cmd.attributes} to the site you are visiting?`;
        break;
      case "render":
        el("status").textContent = cmd.html;
        break;
      case "openWindow":
        break; // issuer script never opens windows
    }
  }
}

export async function bootIdpWindow(): Promise<void> {
  const pkPem = await (await fetch("/pk")).text();
  const issuerKey = await importIssuerKey(pkPem);
  const config = await (await fetch("/config")).json();
  const ctx: IdpScriptContext = {
    group: groupById(config.group),
    issuerKey,
    rng: webcryptoRng,
  };

  let state: IdpScriptState = initialIdpState;
  const feed = async (input: Input): Promise<void> => {
    const [next, commands] = await idpScriptStep(state, input, ctx);
    state = next;
    if (state.halt) {
      el("status").textContent =
        `halted at step ${state.halt.step}: ${state.halt.cause}`;
      return;
    }
    if (state.done) {
      el("status").textContent = "token delivered; you can close this window";
    }
    await runCommands(commands, feed);
  };

  window.addEventListener("message", (event: MessageEvent) => {
    void feed({ kind: "message", content: event.data ?? {}, origin: event.origin });
  });

  el("login-submit").addEventListener("click", () => {
    el("login-form").style.display = "none";
    void feed({
      kind: "credentials",
      username: (el("username") as HTMLInputElement).value,
      password: (el("password") as HTMLInputElement).value,
    });
  });
  el("consent-approve").addEventListener("click", () => {
    el("consent").style.display = "none";
    void feed({ kind: "consent", granted: true });
  });
  el("consent-deny").addEventListener("click", () => {
    el("consent").style.display = "none";
    void feed({ kind: "consent", granted: false });
  });

  await feed({ kind: "self" });
}

if (typeof document !== "undefined" && document.getElementById("idp-demo")) {
  void bootIdpWindow();
}
