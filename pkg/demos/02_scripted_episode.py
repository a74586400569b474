"""One terminal-agent episode driven by a scripted provider, then its trace."""

from termbench.agent import AgentConfig, EpisodeEnvironment
from termbench.cli import render_trace
from termbench.harness.tasks import shipped_path
from termbench.platform import Platform, load_fixture
from termbench.provider import ModelTurn, PricingTable, TokenUsage, ToolInvocation, make_scripted


def sh(i, command, usage=(1500, 40)):
    return ModelTurn(tool_calls=(ToolInvocation(f"call-{i}", "terminal", {"command": command}),), usage=TokenUsage(*usage))


lookup = "eval curl -s $SERVICENOW_EXTRA_HTTP_HEADERS \"'$INSTANCE_URL/api/now/table/sys_user?sysparm_query=user_name=fred.luddy&sysparm_fields=user_name,email'\""
# a PATCH with a body that is not JSON: the platform answers with an error envelope
broken = "eval curl -s -X PATCH $SERVICENOW_EXTRA_HTTP_HEADERS -d \"'state: 2'\" \"'$INSTANCE_URL/api/now/table/incident/INC0000004'\""
fixed = ("eval curl -s -X PATCH $SERVICENOW_EXTRA_HTTP_HEADERS -H \"'Content-Type: application/json'\" "
         "-d \"'{\\\"assigned_to\\\": \\\"fred.luddy\\\"}'\" \"'$INSTANCE_URL/api/now/table/incident/INC0000004'\" | head -c 120")
script = [sh(1, lookup), sh(2, broken), sh(3, fixed), ModelTurn(text="Assigned INC0000004 to fred.luddy.", usage=TokenUsage(1800, 20))]

platform = Platform("servicenow")
platform.seed(load_fixture(shipped_path("fixtures", "itsm.json")))
pricing = PricingTable.load(shipped_path("pricing.json"))
with EpisodeEnvironment(platform, AgentConfig()) as env:
    print(env.system_prompt()[:300], "...\n")
    trace = env.run("Assign INC0000004 to Fred Luddy.", make_scripted(script), pricing=pricing, task_id="demo")
print(render_trace(trace))
print("outcomes:", [o.value for o in trace.outcomes])
platform.shutdown()
