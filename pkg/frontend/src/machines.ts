// The two window scripts as pure state machines. The page drivers feed
// inputs (self trigger, received postMessage, HTTP response, form
// submissions) and execute the returned commands (HTTP call, postMessage
// with target origin, UI prompts). Same transitions as the headless
// agent, plus the two human gates: credential entry and the consent
// prompt before token issuance.

import { certContentBytes } from "./canonical.js";
import { sha256Hex, verifySignature } from "./crypto.js";
import { Group, Rng } from "./group.js";
import { CertContent, WireArtifact, bytesToHex, originOf } from "./wire.js";

export type Input =
  | { kind: "self" }
  | { kind: "message"; content: Record<string, unknown>; origin: string }
  | { kind: "http"; ref: string; status: number; body: any }
  | { kind: "credentials"; username: string; password: string }
  | { kind: "consent"; granted: boolean };

export type Command =
  | { kind: "http"; method: "GET" | "POST"; path: string; ref: string;
      params?: Record<string, string>; body?: unknown }
  | { kind: "post"; content: Record<string, unknown>; targetOrigin: string | null }
  | { kind: "openWindow"; url: string }
  | { kind: "showLogin" }
  | { kind: "showConsent"; attributes: string }
  | { kind: "render"; html: string };

export interface IdpScriptState {
  phase:
    | "Start"
    | "ExpectCert"
    | "ExpectRegistrationResult"
    | "ExpectTokenRequest"
    | "ExpectLoginState"
    | "AwaitCredentials"
    | "ExpectLoginResult"
    | "AwaitConsent"
    | "ExpectToken"
    | "Stop";
  t?: bigint;
  cert?: CertContent;
  pidRp?: string;
  pseudoEndpoint?: string;
  nonceT?: string;
  rpEndpoint?: string;
  nonceOut?: string;
  ref?: string;
  halt?: { step: string; cause: string };
  done?: boolean;
}

export interface IdpScriptContext {
  group: Group;
  issuerKey: CryptoKey;
  rng: Rng;
}

export const initialIdpState: IdpScriptState = { phase: "Start" };

function stop(state: IdpScriptState, step: string, cause: string):
    [IdpScriptState, Command[]] {
  return [{ ...state, phase: "Stop", halt: { step, cause } }, []];
}

function freshRef(rng: Rng): string {
  return bytesToHex(rng.randomBytes(8));
}

async function verifyCert(
  wire: WireArtifact, ctx: IdpScriptContext,
): Promise<CertContent | null> {
  const content = wire.content as unknown as CertContent;
  if (
    typeof content?.id_rp !== "string" ||
    typeof content?.endpoint !== "string" ||
    typeof content?.supplementary !== "object"
  ) {
    return null;
  }
  let payload: Uint8Array;
  try {
    ctx.group.checkWire(content.id_rp);
    payload = certContentBytes(content, ctx.group);
  } catch {
    return null;
  }
  const ok = await verifySignature(ctx.issuerKey, payload, wire.sig);
  return ok ? content : null;
}

export async function idpScriptStep(
  state: IdpScriptState,
  input: Input,
  ctx: IdpScriptContext,
): Promise<[IdpScriptState, Command[]]> {
  if (state.phase === "Start" && input.kind === "self") {
    const t = ctx.group.randomScalar(1n, ctx.rng);
    return [
      { ...state, phase: "ExpectCert", t },
      [{ kind: "post", content: { t: t.toString() }, targetOrigin: null }],
    ];
  }

  if (state.phase === "ExpectCert" && input.kind === "message") {
    const wire = input.content["cert"] as WireArtifact | undefined;
    if (!wire) return [state, []];
    const cert = await verifyCert(wire, ctx);
    if (cert === null) return stop(state, "2.3", "certificate invalid");
    const t = state.t!;
    const pidRp = ctx.group.scalarMul(cert.id_rp, t);
    const pseudoEndpoint = "penpt-" + bytesToHex(ctx.rng.randomBytes(16));
    const nonceT = await sha256Hex(t.toString());
    const ref = freshRef(ctx.rng);
    return [
      { ...state, phase: "ExpectRegistrationResult", cert, pidRp, pseudoEndpoint, nonceT, ref },
      [{
        kind: "http", method: "POST", path: "/dynamicRegistration", ref,
        body: { PID_RP: pidRp, Nonce: nonceT, Enpt: pseudoEndpoint },
      }],
    ];
  }

  if (state.phase === "ExpectRegistrationResult" && input.kind === "http") {
    if (input.ref !== state.ref) return [state, []];
    const wire = input.body?.registration_result as WireArtifact | undefined;
    if (!wire) return stop(state, "3.3", "no registration result");
    if ((wire.content as any)?.status !== "OK") {
      return stop(state, "3", "issuer rejected the blinded identity");
    }
    return [
      { ...state, phase: "ExpectTokenRequest" },
      [{ kind: "post", content: { registration_result: wire }, targetOrigin: null }],
    ];
  }

  if (state.phase === "ExpectTokenRequest" && input.kind === "message") {
    if (!("PID_RP" in input.content)) return [state, []];
    const enpt = input.content["Enpt"];
    if (enpt !== state.cert!.endpoint) {
      return stop(state, "4.1", "endpoint does not match the certificate");
    }
    if (input.content["PID_RP"] !== state.pidRp) {
      return stop(state, "4.1", "blinded identity mismatch in token request");
    }
    const ref = freshRef(ctx.rng);
    return [
      { ...state, phase: "ExpectLoginState", rpEndpoint: String(enpt),
        nonceOut: String(input.content["Nonce"] ?? ""), ref },
      [{ kind: "http", method: "GET", path: "/loginInfo", ref }],
    ];
  }

  if (state.phase === "ExpectLoginState" && input.kind === "http") {
    if (input.ref !== state.ref) return [state, []];
    if (input.body?.result === "Logged") {
      return [{ ...state, phase: "AwaitConsent" },
              [{ kind: "showConsent", attributes: "profile attributes" }]];
    }
    return [{ ...state, phase: "AwaitCredentials" }, [{ kind: "showLogin" }]];
  }

  if (state.phase === "AwaitCredentials" && input.kind === "credentials") {
    const ref = freshRef(ctx.rng);
    return [
      { ...state, phase: "ExpectLoginResult", ref },
      [{
        kind: "http", method: "POST", path: "/login", ref,
        body: { credential: { username: input.username, password: input.password } },
      }],
    ];
  }

  if (state.phase === "ExpectLoginResult" && input.kind === "http") {
    if (input.ref !== state.ref) return [state, []];
    if (input.body?.result !== "LoginSuccess") {
      return stop(state, "4.2", "authentication failed");
    }
    return [{ ...state, phase: "AwaitConsent" },
            [{ kind: "showConsent", attributes: "profile attributes" }]];
  }

  if (state.phase === "AwaitConsent" && input.kind === "consent") {
    if (!input.granted) return stop(state, "4.3", "user declined authorization");
    const ref = freshRef(ctx.rng);
    // the certified endpoint is replaced by the per-login pseudo-endpoint
    return [
      { ...state, phase: "ExpectToken", ref },
      [{
        kind: "http", method: "GET", path: "/authorize", ref,
        params: { PID_RP: state.pidRp!, Enpt: state.pseudoEndpoint!, Nonce: state.nonceOut! },
      }],
    ];
  }

  if (state.phase === "ExpectToken" && input.kind === "http") {
    if (input.ref !== state.ref) return [state, []];
    if (input.body?.result !== "OK" || !input.body?.token) {
      return stop(state, "4.3", `token issuance failed: ${input.body?.error ?? "Fail"}`);
    }
    // deliver to the RP window only: target origin pinned to the endpoint
    // bound in the certificate
    const rpOrigin = originOf(state.rpEndpoint!);
    return [
      { ...state, phase: "Stop", done: true },
      [{ kind: "post", content: { token: input.body.token }, targetOrigin: rpOrigin }],
    ];
  }

  return [state, []];
}

// ---------------------------------------------------------------------------

export interface RpScriptState {
  phase:
    | "Start"
    | "ExpectT"
    | "ExpectCert"
    | "ExpectRegistrationResult"
    | "ExpectTokenRequest"
    | "ExpectToken"
    | "ExpectLoginResult"
    | "Stop";
  ref?: string;
  halt?: { step: string; cause: string };
  done?: boolean;
  account?: string;
}

export interface RpScriptContext {
  idpOrigin: string;
  rng: Rng;
}

export const initialRpState: RpScriptState = { phase: "Start" };

function stopRp(state: RpScriptState, step: string, cause: string):
    [RpScriptState, Command[]] {
  return [{ ...state, phase: "Stop", halt: { step, cause } }, []];
}

export function rpScriptStep(
  state: RpScriptState,
  input: Input,
  ctx: RpScriptContext,
): [RpScriptState, Command[]] {
  if (state.phase === "Start" && input.kind === "self") {
    return [{ ...state, phase: "ExpectT" }, [{ kind: "openWindow", url: "/login" }]];
  }

  if (state.phase === "ExpectT" && input.kind === "message") {
    const t = input.content["t"];
    if (typeof t !== "string" || !/^[0-9]+$/.test(t)) return [state, []];
    const ref = freshRef(ctx.rng);
    // decimal string: JSON numbers cannot carry 256-bit trapdoors
    return [
      { ...state, phase: "ExpectCert", ref },
      [{ kind: "http", method: "POST", path: "/startNegotiation", ref, body: { t } }],
    ];
  }

  if (state.phase === "ExpectCert" && input.kind === "http") {
    if (input.ref !== state.ref) return [state, []];
    const cert = input.body?.cert;
    if (!cert) return stopRp(state, "2.2", `negotiation failed: ${input.body?.error ?? "Fail"}`);
    return [
      { ...state, phase: "ExpectRegistrationResult" },
      [{ kind: "post", content: { cert }, targetOrigin: ctx.idpOrigin }],
    ];
  }

  if (state.phase === "ExpectRegistrationResult" && input.kind === "message") {
    const wire = input.content["registration_result"];
    if (!wire) return [state, []];
    const ref = freshRef(ctx.rng);
    return [
      { ...state, phase: "ExpectTokenRequest", ref },
      [{ kind: "http", method: "POST", path: "/registrationResult", ref,
         body: { registration_result: wire } }],
    ];
  }

  if (state.phase === "ExpectTokenRequest" && input.kind === "http") {
    if (input.ref !== state.ref) return [state, []];
    const body = input.body ?? {};
    if (!("PID_RP" in body)) {
      return stopRp(state, "3.4", `registration result rejected: ${body.error ?? "Fail"}`);
    }
    return [
      { ...state, phase: "ExpectToken" },
      [{ kind: "post",
         content: { PID_RP: body.PID_RP, Enpt: body.Enpt, Nonce: body.Nonce },
         targetOrigin: ctx.idpOrigin }],
    ];
  }

  if (state.phase === "ExpectToken" && input.kind === "message") {
    const token = input.content["token"];
    if (!token) return [state, []];
    const ref = freshRef(ctx.rng);
    return [
      { ...state, phase: "ExpectLoginResult", ref },
      [{ kind: "http", method: "POST", path: "/uploadToken", ref, body: { token } }],
    ];
  }

  if (state.phase === "ExpectLoginResult" && input.kind === "http") {
    if (input.ref !== state.ref) return [state, []];
    if (input.body?.result !== "LoginSuccess") {
      return stopRp(state, "5.2", `rp rejected the token: ${input.body?.error ?? "Fail"}`);
    }
    const account = String(input.body.account ?? "");
    return [
      { ...state, done: true, account },
      [{ kind: "render", html: `logged in as account ${account}` }],
    ];
  }

  return [state, []];
}
