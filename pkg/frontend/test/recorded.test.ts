// Drives both window machines together against fixture service responses
// and records every HTTP request body the browser side would send. The
// service-side test suite replays the recorded bodies to prove the wire
// formats are byte-compatible.

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { importIssuerKey } from "../src/crypto.js";
import { Rng, toyGroup } from "../src/group.js";
import {
  Command,
  IdpScriptContext,
  IdpScriptState,
  Input,
  RpScriptContext,
  RpScriptState,
  idpScriptStep,
  initialIdpState,
  initialRpState,
  rpScriptStep,
} from "../src/machines.js";

const fixtures = JSON.parse(readFileSync("fixtures/fixtures.json", "utf8"));
const toy = fixtures.toy;

class CountingRng implements Rng {
  private counter = 0;

  randomBytes(n: number): Uint8Array {
    const out = new Uint8Array(n);
    this.counter += 1;
    for (let i = 0; i < n; i++) out[i] = (this.counter * 37 + i * 11) & 0xff;
    return out;
  }
}

// scalar draws take lo+1 + (bytes % span); an all-zero buffer ending in
// 0x01 pins the issuer machine's trapdoor to the fixture value 3
class PinnedTrapdoorRng extends CountingRng {
  private first = true;

  randomBytes(n: number): Uint8Array {
    if (this.first) {
      this.first = false;
      const out = new Uint8Array(n);
      out[n - 1] = 1;
      return out;
    }
    return super.randomBytes(n);
  }
}

interface Recorded {
  service: "idp" | "rp";
  method: string;
  path: string;
  params?: Record<string, string>;
  body?: unknown;
}

describe("recorded browser exchange", () => {
  it("completes a full login against fixture responses and records bodies", async () => {
    const issuerKey = await importIssuerKey(fixtures.issuer_public_key_pem);
    const idpCtx: IdpScriptContext = {
      group: toyGroup, issuerKey, rng: new PinnedTrapdoorRng(),
    };
    const rpCtx: RpScriptContext = { idpOrigin: "http://127.0.0.1:8600", rng: new CountingRng() };

    let idpState: IdpScriptState = initialIdpState;
    let rpState: RpScriptState = initialRpState;
    const recorded: Recorded[] = [];
    let pseudoEndpoint = "";

    // canned service behavior, keyed by path, exactly what live services
    // return for the fixture inputs
    const respond = (service: "idp" | "rp", cmd: Extract<Command, { kind: "http" }>) => {
      recorded.push({ service, method: cmd.method, path: cmd.path,
                      params: cmd.params, body: cmd.body });
      switch (cmd.path) {
        case "/startNegotiation":
          return { cert: toy.cert };
        case "/dynamicRegistration":
          pseudoEndpoint = (cmd.body as any).Enpt;
          return { registration_result: toy.registration_result };
        case "/registrationResult":
          return toy.token_request;
        case "/loginInfo":
          return { result: "Unlogged" };
        case "/login":
          return { result: "LoginSuccess" };
        case "/authorize":
          return { result: "OK", token: toy.token,
                   nonce: cmd.params?.Nonce, pseudo_endpoint: cmd.params?.Enpt };
        case "/uploadToken":
          return { result: "LoginSuccess", account: toy.account };
        default:
          throw new Error(`unexpected path ${cmd.path}`);
      }
    };

    const feedIdp = async (input: Input): Promise<void> => {
      const [next, commands] = await idpScriptStep(idpState, input, idpCtx);
      idpState = next;
      expect(idpState.halt).toBeUndefined();
      for (const cmd of commands) await runIdp(cmd);
    };
    const feedRp = async (input: Input): Promise<void> => {
      const [next, commands] = rpScriptStep(rpState, input, rpCtx);
      rpState = next;
      expect(rpState.halt).toBeUndefined();
      for (const cmd of commands) await runRp(cmd);
    };

    const runIdp = async (cmd: Command): Promise<void> => {
      if (cmd.kind === "http") {
        await feedIdp({ kind: "http", ref: cmd.ref, status: 200, body: respond("idp", cmd) });
      } else if (cmd.kind === "post") {
        await feedRp({ kind: "message", content: cmd.content, origin: "http://127.0.0.1:8600" });
      } else if (cmd.kind === "showLogin") {
        await feedIdp({ kind: "credentials", username: "alice", password: "correct horse" });
      } else if (cmd.kind === "showConsent") {
        await feedIdp({ kind: "consent", granted: true });
      }
    };
    const runRp = async (cmd: Command): Promise<void> => {
      if (cmd.kind === "http") {
        await feedRp({ kind: "http", ref: cmd.ref, status: 200, body: respond("rp", cmd) });
      } else if (cmd.kind === "post") {
        await feedIdp({ kind: "message", content: cmd.content, origin: "http://127.0.0.1:8700" });
      }
      // openWindow: the issuer window boots itself below
    };

    await feedRp({ kind: "self" });
    await feedIdp({ kind: "self" });

    expect(rpState.done).toBe(true);
    expect(rpState.account).toBe(toy.account);
    expect(idpState.done).toBe(true);

    // strip the volatile ref, keep everything the wire carries
    const out = {
      note: "browser-constructed request bodies for the fixture inputs",
      trapdoor: toy.trapdoor,
      pseudo_endpoint: pseudoEndpoint,
      requests: recorded,
    };
    mkdirSync("fixtures", { recursive: true });
    writeFileSync("fixtures/recorded_browser_bodies.json", JSON.stringify(out, null, 1));

    const paths = recorded.map((r) => `${r.service}:${r.path}`);
    expect(paths).toEqual([
      "rp:/startNegotiation",
      "idp:/dynamicRegistration",
      "rp:/registrationResult",
      "idp:/loginInfo",
      "idp:/login",
      "idp:/authorize",
      "rp:/uploadToken",
    ]);
  });
});
