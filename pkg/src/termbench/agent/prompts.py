"""System prompt assembly from the prompt library in ``termbench/data/prompts``.

Files are keyed ``<profile>/<name>.md``; a profile without its own copy of a
prompt reuses the ServiceNow text with the platform name and header variable
swapped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

from ..platform import PlatformProfile, get_profile

PARADIGMS = ("terminal", "tool_registry", "hybrid", "web_adapter")
FEATURES = ("docs", "skills")
ORCHESTRATIONS = ("single", "planner_executor")
ROLES = ("agent", "planner", "executor")


class UnknownProfile(KeyError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    paradigm: str = "terminal"
    features: frozenset[str] = field(default_factory=frozenset)
    orchestration: str = "single"
    max_tool_calls: int = 50
    model: str = "scripted"
    platform: str = "servicenow"

    def __post_init__(self):
        object.__setattr__(self, "features", frozenset(self.features))
        if self.paradigm not in PARADIGMS:
            raise ValueError(f"unknown paradigm {self.paradigm!r}")
        if self.orchestration not in ORCHESTRATIONS:
            raise ValueError(f"unknown orchestration {self.orchestration!r}")
        if not self.features <= set(FEATURES):
            raise ValueError(f"unknown features {sorted(self.features - set(FEATURES))}")
        if self.max_tool_calls <= 0:
            raise ValueError("max_tool_calls must be positive")

    def to_dict(self) -> dict:
        return {
            "paradigm": self.paradigm,
            "features": sorted(self.features),
            "orchestration": self.orchestration,
            "max_tool_calls": self.max_tool_calls,
            "model": self.model,
            "platform": self.platform,
        }


def _read(relpath: str) -> str | None:
    node = resources.files("termbench") / "data" / "prompts"
    for part in relpath.split("/"):
        node = node / part
    return node.read_text("utf-8") if node.is_file() else None


def load_prompt(profile: PlatformProfile, name: str) -> str:
    text = _read(f"{profile.name}/{name}.md")
    if text is None:
        text = _read(f"servicenow/{name}.md")
        if text is None:
            raise FileNotFoundError(f"no prompt named {name!r}")
        text = text.replace("SERVICENOW_EXTRA_HTTP_HEADERS", profile.headers_env)
        text = text.replace("ServiceNow", profile.display_name)
    return text


def _section(text: str, heading: str) -> str:
    m = re.search(rf"^## {re.escape(heading)}\n.*?(?=^## |\Z)", text, re.S | re.M)
    return m.group(0).rstrip() + "\n" if m else ""


def _finish(parts: list[str], base_url: str) -> str:
    text = "\n\n".join(p.strip("\n") for p in parts if p and p.strip())
    # a standalone "..." paragraph marks elided context in the stored texts
    text = re.sub(r"(^|\n\n)\.\.\.[ \t]*(?=\n\n|\n?$)", "", text)
    text = re.sub(r"\n{3,}", "\n\n", text)
    return text.replace("<url>", base_url).rstrip() + "\n"


def _registry_note(tool_names) -> str:
    names = ", ".join(f"`{n}`" for n in sorted(tool_names))
    return (
        "## Platform tools\n\n"
        f"Besides the terminal you can call these platform tools directly: {names}.\n"
        "If a tool returns an error, read the error message carefully and adjust your approach."
    )


def assemble_system_prompt(
    profile: PlatformProfile | str,
    config: AgentConfig,
    *,
    base_url: str = "<url>",
    role: str = "agent",
    plan_text: str = "",
    toolsets: dict[str, list[str]] | None = None,
) -> str:
    """Base prompt for the paradigm or role, plus feature extensions.

    ``toolsets`` maps toolset name to tool names; a hybrid configuration uses
    it to pick the browser variant or to list the extra platform tools.
    """
    if isinstance(profile, str):
        try:
            profile = get_profile(profile)
        except KeyError as exc:
            raise UnknownProfile(str(exc)) from None
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")

    terminal = load_prompt(profile, "terminal")
    if role == "planner":
        parts = [load_prompt(profile, "planner"), _section(terminal, "API calls")]
    elif role == "executor":
        parts = [load_prompt(profile, "executor"), _section(terminal, "API calls")]
    elif config.paradigm == "terminal":
        parts = [terminal]
    elif config.paradigm == "tool_registry":
        parts = [load_prompt(profile, "tool_registry")]
    elif config.paradigm == "web_adapter":
        parts = [load_prompt(profile, "web_adapter")]
    elif "browser" in (toolsets or {}):
        parts = [load_prompt(profile, "hybrid")]
    else:
        extra = [t for name, tools in (toolsets or {}).items() if name != "terminal" for t in tools]
        parts = [terminal, _registry_note(extra)]

    if "docs" in config.features:
        parts.append(load_prompt(profile, "docs"))
    if "skills" in config.features:
        parts.append(_read("common/skills.md"))
    if role == "executor":
        parts.append("## Plan from the planner\n\n" + plan_text.strip())
    return _finish(parts, base_url)
