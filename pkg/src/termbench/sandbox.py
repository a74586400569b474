"""Run shell commands in a per-episode working directory with a timeout,
bounded output capture, environment injection, and a lexical HTTP-method policy."""

from __future__ import annotations

import os
import re
import selectors
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

TRUNCATION_MARKER = "[OUTPUT TRUNCATED]"
TRUNCATION_SUFFIX = " " + TRUNCATION_MARKER
TIMEOUT_EXIT_CODE = 124
NO_OUTPUT = "[no output]"
PLANNING_DENIAL = "state-changing API calls are not permitted in the planning phase"

_MUTATING_METHOD = re.compile(
    r"(?:-X|--request)(?:\s+|=)?['\"]?(POST|PUT|PATCH|DELETE)\b", re.IGNORECASE
)


class SpawnError(OSError):
    """The command could not be started (missing workdir or shell)."""


@dataclass(frozen=True)
class ExecLimits:
    timeout: float = 30.0
    max_output_bytes: int = 16384

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_output_bytes <= 0:
            raise ValueError("max_output_bytes must be positive")


@dataclass
class SandboxPolicy:
    workdir: Path
    mode: str = "unrestricted"
    env: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("unrestricted", "read_only_http"):
            raise ValueError(f"unknown sandbox mode {self.mode!r}")
        self.workdir = Path(self.workdir)


@dataclass
class ExecResult:
    stdout: str
    stderr: str
    exit_code: int
    duration: float
    truncated: bool = False
    timed_out: bool = False
    # stdout and stderr interleaved in capture order, marker included
    output: str = ""

    def render(self) -> str:
        """The observation text the agent sees for this command."""
        text = self.output
        if self.exit_code == 0 and not text:
            return NO_OUTPUT
        if self.exit_code != 0:
            if text and not text.endswith("\n"):
                text += "\n"
            text += f"[exit code: {self.exit_code}]"
        return text

    def to_dict(self, *, with_duration: bool = True) -> dict:
        d = {
            "stdout": self.stdout,
            "stderr": self.stderr,
            "exit_code": self.exit_code,
            "truncated": self.truncated,
            "timed_out": self.timed_out,
            "output": self.output,
        }
        if with_duration:
            d["duration"] = self.duration
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExecResult:
        return cls(
            d["stdout"], d["stderr"], d["exit_code"], d.get("duration", 0.0),
            d.get("truncated", False), d.get("timed_out", False), d.get("output", ""),
        )


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: str = ""


def check_policy(command: str, policy: SandboxPolicy) -> Decision:
    if policy.mode == "read_only_http" and _MUTATING_METHOD.search(command):
        return Decision(False, PLANNING_DENIAL)
    return Decision(True)


def _decode(chunks: list[bytes]) -> str:
    return b"".join(chunks).decode("utf-8", "replace")


def execute(command: str, policy: SandboxPolicy, limits: ExecLimits = ExecLimits()) -> ExecResult:
    """Run ``command`` under ``/bin/sh`` in the policy's workdir.

    Output beyond ``max_output_bytes`` (counted over both streams together)
    is dropped and the marker appended. Timeouts kill the whole process group
    and come back as a normal result with ``timed_out`` set.
    """
    workdir = policy.workdir
    if not workdir.is_dir():
        raise SpawnError(f"workdir does not exist: {workdir}")
    env = {"PATH": os.environ.get("PATH", "/usr/bin:/bin"), "HOME": str(workdir), "LANG": "C.UTF-8"}
    env.update(policy.env)
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            ["/bin/sh", "-c", command],
            cwd=workdir,
            env=env,
            stdin=subprocess.DEVNULL,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
    except OSError as exc:
        raise SpawnError(str(exc)) from exc

    budget = limits.max_output_bytes
    kept = {"stdout": [], "stderr": []}
    order: list[tuple[str, bytes]] = []
    truncated = False
    timed_out = False
    deadline = start + limits.timeout

    sel = selectors.DefaultSelector()
    sel.register(proc.stdout, selectors.EVENT_READ, "stdout")
    sel.register(proc.stderr, selectors.EVENT_READ, "stderr")
    try:
        while sel.get_map():
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                timed_out = True
                break
            for key, _ in sel.select(timeout=min(remaining, 0.25)):
                data = os.read(key.fileobj.fileno(), 65536)
                if not data:
                    sel.unregister(key.fileobj)
                    continue
                piece = data[:budget]
                if piece:
                    budget -= len(piece)
                    kept[key.data].append(piece)
                    order.append((key.data, piece))
                if len(piece) < len(data):
                    # keep draining so the child never blocks on a full pipe
                    truncated = True
    finally:
        sel.close()
        if timed_out:
            _kill_group(proc)
        try:
            proc.wait(timeout=max(0.0, deadline - time.monotonic()) + 1.0)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_group(proc)
            proc.wait()
        proc.stdout.close()
        proc.stderr.close()
    duration = time.monotonic() - start

    stdout = _decode(kept["stdout"])
    stderr = _decode(kept["stderr"])
    output = "".join(p.decode("utf-8", "replace") for _, p in _merge(order))
    if truncated:
        output += TRUNCATION_SUFFIX
        if order and order[-1][0] == "stderr":
            stderr += TRUNCATION_SUFFIX
        else:
            stdout += TRUNCATION_SUFFIX
    if timed_out:
        message = f"[error] Command timed out after {limits.timeout:g}s."
        stderr = f"{stderr}\n{message}" if stderr else message
        output = f"{output}\n{message}" if output else message
        exit_code = TIMEOUT_EXIT_CODE
    else:
        exit_code = proc.returncode
        if exit_code < 0:
            exit_code = 128 - exit_code
    return ExecResult(stdout, stderr, exit_code, duration, truncated, timed_out, output)


def _merge(order: list[tuple[str, bytes]]) -> list[tuple[str, bytes]]:
    # join consecutive pieces from the same stream so multibyte characters
    # split across reads decode cleanly
    merged: list[tuple[str, bytes]] = []
    for stream, piece in order:
        if merged and merged[-1][0] == stream:
            merged[-1] = (stream, merged[-1][1] + piece)
        else:
            merged.append((stream, piece))
    return merged


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass


def make_workdir(root: str | Path | None = None, prefix: str = "episode-") -> Path:
    """Create a fresh private working directory."""
    path = Path(tempfile.mkdtemp(prefix=prefix, dir=root))
    path.chmod(0o700)
    return path
