"""Three tasks sharing one skills directory: write, promote, reuse."""

import tempfile
from pathlib import Path

from termbench.agent import AgentConfig
from termbench.harness import load_suite, run_suite, scripted_factory, skills_growth
from termbench.harness.runner import RunDirectory
from termbench.skills import SkillStore

suite = load_suite("skills-lifecycle")
out = Path(tempfile.mkdtemp()) / "skills-run"
result = run_suite(suite, AgentConfig(features={"skills"}), scripted_factory(suite.load_trajectories()), out_dir=out)

for ev in RunDirectory(out).skills_events():
    print(f"{ev['task_id']}: created={ev['created']} promoted={ev['promoted']} "
          f"first skills read at call {ev['first_skills_read']}")
print()
for point in skills_growth(RunDirectory(out).skills_events()):
    print(f"{point['task_id']}: successes={point['cumulative_successes']} "
          f"files={point['file_count']} KB={point['total_kilobytes']:.3f}")

skill = SkillStore(out / "skills").read("procedures/create_change_request.md")
print(f"\n{skill.title!r} is {skill.status}")
print(skill.sections["pitfalls"])
