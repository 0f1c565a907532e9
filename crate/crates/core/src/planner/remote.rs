//! Chat-completion planner over HTTP. Falls back to [`HeuristicPlanner`] once
//! the endpoint fails twice in a row.

use std::time::Duration;

use serde_json::{json, Value};

use super::{HeuristicPlanner, PlannerBackend, PlannerContext, PlannerDecision, PlannerError, SelectRequest};
use crate::registry::ToolCard;

pub const URL_ENV: &str = "STAR_PLANNER_URL";
pub const TOKEN_ENV: &str = "STAR_PLANNER_TOKEN";

pub struct RemoteChatPlanner {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
    fallback: HeuristicPlanner,
    degraded: bool,
    failures: u32,
}

impl std::fmt::Debug for RemoteChatPlanner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteChatPlanner")
            .field("url", &self.url)
            .field("degraded", &self.degraded)
            .finish_non_exhaustive()
    }
}

/// Extracts the single fenced JSON block from a chat reply. A reply that is
/// bare JSON is accepted as well.
pub fn fenced_json(content: &str) -> Result<Value, String> {
    let parts: Vec<&str> = content.split("```").collect();
    if parts.len() < 3 {
        return serde_json::from_str(content.trim()).map_err(|e| format!("no fenced json block: {e}"));
    }
    if parts.len() > 3 {
        return Err("more than one fenced block".into());
    }
    let body = parts[1].trim_start();
    let body = body.strip_prefix("json").unwrap_or(body);
    serde_json::from_str(body.trim()).map_err(|e| format!("fenced block is not json: {e}"))
}

fn card_json(cards: &[&ToolCard]) -> Vec<Value> {
    cards.iter().filter_map(|c| serde_json::to_value(c).ok()).collect()
}

fn user_message(ctx: &PlannerContext<'_>, instruction: &str) -> Value {
    let opts: Vec<String> =
        ctx.options.iter().enumerate().map(|(i, o)| format!("{}. {o}", super::LETTERS.as_bytes()[i] as char)).collect();
    let history: Vec<String> = ctx
        .history
        .iter()
        .map(|o| match &o.error {
            Some(e) => format!("step {}: {} failed: {e}", o.step, o.tool),
            None => format!("step {}: {} ok", o.step, o.tool),
        })
        .collect();
    json!({
        "role": "user",
        "content": format!(
            "Question: {}\nOptions:\n{}\nTool history:\n{}\nVisible frames:\n{}\n\n{}",
            ctx.question,
            opts.join("\n"),
            if history.is_empty() { "(none)".to_string() } else { history.join("\n") },
            ctx.context,
            instruction
        )
    })
}

impl RemoteChatPlanner {
    pub fn new(url: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { url: url.into(), token, agent, fallback: HeuristicPlanner::new(), degraded: false, failures: 0 }
    }

    /// Reads the endpoint and token from the environment.
    pub fn from_env() -> Result<Self, PlannerError> {
        let url = std::env::var(URL_ENV).map_err(|_| PlannerError::Backend(format!("{URL_ENV} is not set")))?;
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Ok(Self::new(url, token, Duration::from_secs(60)))
    }

    fn chat(&self, system: &str, messages: &[Value], cards: &[&ToolCard]) -> Result<String, String> {
        let body = json!({"system": system, "messages": messages, "tool_cards": card_json(cards)});
        let mut req = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| e.to_string())?;
        let v: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        v.get("content").and_then(Value::as_str).map(String::from).ok_or_else(|| "reply has no content".to_string())
    }

    /// Sends the request, then once more with a corrective note if the reply
    /// cannot be parsed. A second failure degrades the planner for good.
    fn ask<T>(
        &mut self,
        system: &str,
        mut messages: Vec<Value>,
        cards: &[&ToolCard],
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Option<T> {
        for attempt in 0..2 {
            let reply = self.chat(system, &messages, cards);
            let outcome = reply.and_then(|c| {
                parse(&c).inspect_err(|_| messages.push(json!({"role": "assistant", "content": c})))
            });
            match outcome {
                Ok(v) => {
                    self.failures = 0;
                    return Some(v);
                }
                Err(e) if attempt == 0 => messages.push(json!({
                    "role": "user",
                    "content": format!("Your reply could not be used ({e}). Reply with exactly one fenced json block.")
                })),
                Err(_) => {}
            }
        }
        self.failures += 1;
        self.degraded = true;
        None
    }
}

impl PlannerBackend for RemoteChatPlanner {
    fn name(&self) -> &str {
        "remote"
    }

    fn select_tool(&mut self, req: &SelectRequest<'_>) -> Result<PlannerDecision, PlannerError> {
        if self.degraded {
            return self.fallback.select_tool(req);
        }
        let mut instruction = String::from(
            "Choose the next tool from tool_cards. Reply with one fenced json block holding \
             {\"kind\": \"invoke_tool\" | \"sufficient\", \"tool_name\", \"tool_args\", \"rationale\"}.",
        );
        if req.must_invoke {
            instruction.push_str(" You must invoke a tool at this step.");
        }
        let mut messages = vec![user_message(&req.ctx, &instruction)];
        if let Some(c) = req.correction {
            messages.push(json!({"role": "user", "content": c}));
        }
        let parsed = self.ask(req.ctx.system_prompt, messages, req.allowed, |c| {
            serde_json::from_value::<PlannerDecision>(fenced_json(c)?).map_err(|e| e.to_string())
        });
        match parsed {
            Some(d) => Ok(d),
            None => self.fallback.select_tool(req),
        }
    }

    fn judge_sufficiency(&mut self, ctx: &PlannerContext<'_>) -> Result<bool, PlannerError> {
        if self.degraded {
            return self.fallback.judge_sufficiency(ctx);
        }
        let messages = vec![user_message(
            ctx,
            "Is the visible information sufficient to answer? Reply with one fenced json block {\"sufficient\": true|false}.",
        )];
        let parsed = self.ask(ctx.system_prompt, messages, &[], |c| {
            fenced_json(c)?.get("sufficient").and_then(Value::as_bool).ok_or_else(|| "missing \"sufficient\"".into())
        });
        match parsed {
            Some(b) => Ok(b),
            None => self.fallback.judge_sufficiency(ctx),
        }
    }

    fn generate_answer(&mut self, ctx: &PlannerContext<'_>) -> Result<String, PlannerError> {
        if self.degraded {
            return self.fallback.generate_answer(ctx);
        }
        let messages = vec![user_message(ctx, "Answer with the letter of the correct option.")];
        let parsed = self.ask(ctx.system_prompt, messages, &[], |c| {
            Ok(match fenced_json(c) {
                Ok(v) => v.get("answer").and_then(Value::as_str).map(String::from).unwrap_or_else(|| c.to_string()),
                Err(_) => c.to_string(),
            })
        });
        match parsed {
            Some(a) => Ok(a),
            None => self.fallback.generate_answer(ctx),
        }
    }

    fn degraded(&self) -> bool {
        self.degraded
    }
}
