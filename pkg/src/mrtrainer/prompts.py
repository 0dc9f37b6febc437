"""Prompt templates for the trainer agent and the dataset generator."""

from __future__ import annotations

from .manuals import ManualChunk, render_chunk_text
from .simulator import ToolCall, ToolResponse, registry_json

# System prompt of the live trainer agent.
ASSISTANT_SYSTEM_PROMPT = """\
You are a helpful AI assistant who aims to train the user how to assemble a LEGO car in XR immersive system.
Extended Reality (XR) directs to the assortment of Virtual Reality (VR), Augmented Reality (AR), and Mixed Reality (MR).
Please make sure you complete the objective above with the following rules:
(1) The user is a trainee who is wearing HoloLen 2 glasses and is able to see XR environments in real-time.
(2) You are able to call Unity functions in the LEGO AR application.
(3) You are able to obtain HoloLens 2 Sensor Streaming data.
(4) Alert if the user asks you something outside of the LEGO assembly task but do not give overconfident answers.
Your task is to answer the user's questions and assist the user in understanding how to complete the LEGO assembly task in XR."""

# Requirement-elicitation task description.
REQUIREMENTS_TASK = """\
You are an AI agent who acts as a Unity developer for AR applications. Your role is to analyze \
users' functional needs based on the manuals and then develop the corresponding functions in an \
AR training system. Note that is not for visually impaired users, but for trainees who are \
visually healthy and able to wear HoloLen2 AR glasses."""

# Conversation-generation task descriptions.
DIALOGUE_TASK_BRIEF = """\
The task is to generate multiple turns of conversations and called tools between the trainer \
(assistant) and trainee (user) grounded on the task-specific guidelines and tools in LEGO XR \
application."""

DIALOGUE_TASK_FULL = """\
The trainer aims to teach the trainee how to accomplish the assembly task based on the \
task-specific guidelines, supported by an XR application. Specifically, the trainee is wearing \
AR glasses to see both VR environment and real world. The trainee knows nothing about the \
guidelines before trainer's guidance. For each step, the trainee must ask at least one \
deep-dive question, or request a troublesome issue if he or she cannot follow the guide, or \
call tools from XR application and learn how to use those tools; the trainer must answer the \
question, assist the trainee, show them the responses to the execution of the tools. At the \
end of a conversation, first, the trainer must ask if the trainee has accomplished the task \
and the trainee must tell if the trainee can accomplish the task; second, the trainer must ask \
how is user experiences, and the trainee provide feedback on the user experience. You must add \
a section title to separate which key point in the guideline in the generated conversation and \
generate until the final step of the guidelines."""

# How the agent must format a tool invocation. Placeholder names only; the
# rendered system prompt lists each real tool exactly once.
TOOL_SYNTAX_INSTRUCTION = """\
To call a tool, reply with exactly one fenced block and nothing else:
```tool
{"name": "<ToolName>", "args": {}}
```
Tools that take arguments get them in "args" (for example {"step": 3} or {"direction": "Left"}).
After the block you will receive the tool's observation; continue until you can answer the \
trainee in plain text."""

# Output grammar the dataset generator asks the LLM to follow.
TRANSCRIPT_FORMAT_INSTRUCTION = """\
Write the conversation in this exact plain-text format:
- a section title line "## <key point>" before each part of the guideline,
- one line per utterance, starting with "Trainer: " or "Trainee: ", strictly alternating and \
starting with the trainer,
- tool invocations inline as a fenced block on its own lines:
```tool
{"name": "<ToolName>", "args": {}}
```"""


def render_tool_lines(tools: list[dict] | None = None) -> str:
    """Registry rendered as "name: description" lines (args clause if any)."""
    rows = tools if tools is not None else registry_json()
    lines = []
    for row in rows:
        suffix = ""
        if row.get("args"):
            args = ", ".join(f"{k}: {v}" for k, v in row["args"].items())
            suffix = f" (args: {args})"
        lines.append(f"{row['name']}: {row['description']}{suffix}")
    return "\n".join(lines)


def render_system_prompt(chunk: ManualChunk, tools: list[dict] | None = None) -> str:
    """Trainer-agent system prompt: objective, grounding chunk, tools, syntax."""
    return "\n\n".join(
        [
            ASSISTANT_SYSTEM_PROMPT,
            "Task-specific guideline (follow it step by step):\n" + render_chunk_text(chunk),
            "You can call the following tools of the XR application:\n" + render_tool_lines(tools),
            TOOL_SYNTAX_INSTRUCTION,
        ]
    )


def render_requirements_prompt(manual_samples: list[str]) -> str:
    """Requirement-elicitation prompt over sample manual texts."""
    body = "\n\n".join(manual_samples)
    return f"{REQUIREMENTS_TASK}\nHere are samples of manuals:\n{body}"


def render_dialogue_system_prompt() -> str:
    """Dataset-generation system prompt: task, tool table, output grammar."""
    return "\n\n".join(
        [
            DIALOGUE_TASK_BRIEF,
            DIALOGUE_TASK_FULL,
            "Serving tools of the XR application:\n" + render_tool_lines(),
            TRANSCRIPT_FORMAT_INSTRUCTION,
        ]
    )


def render_tool_response_lines(tool_responses: list[tuple[ToolCall, ToolResponse]]) -> str:
    lines = []
    for call, response in tool_responses:
        args = f" {call.args}" if call.args else ""
        lines.append(f"- {call.name}{args} -> {response.text}")
    return "\n".join(lines)


def render_dialogue_query_prompt(
    chunk: ManualChunk,
    tool_responses: list[tuple[ToolCall, ToolResponse]],
) -> str:
    """Per-conversation query: brief task, grounding chunk, tool responses."""
    return "\n\n".join(
        [
            DIALOGUE_TASK_BRIEF,
            render_chunk_text(chunk),
            "Imagine some trainee's utterances have the intent of using the tools with the "
            "following responses:\n" + render_tool_response_lines(tool_responses),
        ]
    )
