"""File-backed skills memory.

The agent edits ``skills/`` through its shell; :class:`SkillStore` is the
harness-side view used to search, parse, promote and measure those files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

STATUSES = ("unverified", "verified")
SECTION_HEADINGS = {
    "when_to_use": "When to use",
    "procedure": "Procedure",
    "important_details": "Important details",
    "pitfalls": "Pitfalls",
}
SUBDIRECTORIES = ("procedures", "api", "troubleshooting")

_STATUS_LINE = re.compile(r"^\*\*Status:\*\*[ \t]*(\S.*?)[ \t]*$", re.MULTILINE)
# any casing of the status label counts as a status line, so that mis-cased
# variants are rejected instead of silently ignored
_STATUS_LIKE = re.compile(r"^\*\*status:\*\*", re.MULTILINE | re.IGNORECASE)
_HEADING = re.compile(r"^(#{1,6})[ \t]+(.+?)[ \t]*#*[ \t]*$", re.MULTILINE)


class SkillError(ValueError):
    pass


class MissingStatusLine(SkillError):
    pass


class UnknownStatus(SkillError):
    pass


class IllegalTransition(SkillError):
    pass


class PathEscape(SkillError):
    pass


@dataclass
class Skill:
    path: str
    title: str
    status: str
    sections: dict[str, str]
    size_bytes: int


@dataclass
class SkillStats:
    file_count: int
    total_kilobytes: float
    per_directory_counts: dict[str, int] = field(default_factory=dict)

    @property
    def mean_kilobytes(self) -> float:
        return self.total_kilobytes / self.file_count if self.file_count else 0.0


def parse_skill(content: str, path: str = "") -> Skill:
    status_lines = _STATUS_LIKE.findall(content)
    if not status_lines:
        raise MissingStatusLine(f"{path or 'skill'}: no '**Status:**' line")
    if len(status_lines) > 1:
        raise SkillError(f"{path or 'skill'}: more than one status line")
    match = _STATUS_LINE.search(content)
    if match is None:
        raise UnknownStatus(f"{path or 'skill'}: malformed status line")
    status = match.group(1)
    if status not in STATUSES:
        raise UnknownStatus(f"{path or 'skill'}: unknown status {status!r}")

    title = ""
    sections = {key: "" for key in SECTION_HEADINGS}
    by_heading = {v.lower(): k for k, v in SECTION_HEADINGS.items()}
    headings = list(_HEADING.finditer(content))
    for i, h in enumerate(headings):
        level, text = len(h.group(1)), h.group(2).strip()
        if level == 1 and not title:
            title = text
        key = by_heading.get(text.lower()) if level == 2 else None
        if key is None:
            continue
        end = len(content)
        for nxt in headings[i + 1:]:
            if len(nxt.group(1)) <= 2:
                end = nxt.start()
                break
        sections[key] = content[h.end():end].strip("\n").strip()
    return Skill(path, title, status, sections, len(content.encode("utf-8")))


def is_skills_read(command: str) -> bool:
    """Whether a shell command looks at the skills directory."""
    if "skills" not in command:
        return False
    return bool(re.search(r"\b(grep|rg|cat|head|tail|ls|find|tree|less|sed -n)\b[^|;&>]*skills", command))


class SkillStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _resolve(self, relpath: str | Path) -> Path:
        root = self.root.resolve()
        target = (root / relpath).resolve()
        if target != root and root not in target.parents:
            raise PathEscape(f"{relpath} resolves outside the skills root")
        return target

    def files(self) -> list[Path]:
        if not self.root.is_dir():
            return []
        root = self.root.resolve()
        out = []
        for p in sorted(self.root.rglob("*")):
            if p.is_file() and not p.is_symlink() and root in p.resolve().parents:
                out.append(p)
        return out

    def relpath(self, path: Path) -> str:
        return path.relative_to(self.root).as_posix()

    def search(self, keyword: str) -> list[str]:
        needle = keyword.casefold()
        hits = []
        for p in self.files():
            text = p.read_text("utf-8", errors="replace")
            if needle in text.casefold():
                hits.append(self.relpath(p))
        return sorted(hits)

    def read(self, relpath: str) -> Skill:
        target = self._resolve(relpath)
        return parse_skill(target.read_text("utf-8"), relpath)

    def upsert(self, topic_filename: str, content: str) -> str:
        target = self._resolve(topic_filename)
        if target == self.root.resolve():
            raise PathEscape("topic filename must name a file")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, "utf-8")
        return target.relative_to(self.root.resolve()).as_posix()

    def set_status(self, relpath: str, new_status: str) -> None:
        if new_status not in STATUSES:
            raise UnknownStatus(new_status)
        target = self._resolve(relpath)
        content = target.read_text("utf-8")
        current = parse_skill(content, relpath).status
        if current == new_status:
            return
        if current == "verified":
            raise IllegalTransition(f"{relpath}: verified skills cannot be demoted")
        content = _STATUS_LINE.sub(f"**Status:** {new_status}", content, count=1)
        target.write_text(content, "utf-8")

    def prune(self, relpath: str) -> None:
        self._resolve(relpath).unlink()

    def stats(self) -> SkillStats:
        files = self.files()
        per_dir: dict[str, int] = {}
        total = 0
        for p in files:
            total += p.stat().st_size
            parent = p.parent.relative_to(self.root).as_posix()
            per_dir[parent] = per_dir.get(parent, 0) + 1
        return SkillStats(len(files), total / 1024, per_dir)

    def inventory(self) -> dict[str, dict]:
        """Per-file size and status (``None`` when the file does not parse)."""
        out = {}
        for p in self.files():
            rel = self.relpath(p)
            try:
                status = parse_skill(p.read_text("utf-8", errors="replace"), rel).status
            except SkillError:
                status = None
            out[rel] = {"size_bytes": p.stat().st_size, "status": status}
        return out
