"""Seed the mock ITSM platform, query it over loopback HTTP, mutate it, reset it."""

import json
import subprocess

from termbench.harness.tasks import shipped_path
from termbench.platform import Platform, load_fixture

platform = Platform("servicenow")
snapshot = platform.seed(load_fixture(shipped_path("fixtures", "itsm.json")))
url = platform.serve()
print(f"serving {snapshot.fixture_name} at {url}")
print(f"snapshot digest {snapshot.digest[:16]}...")

# the agent's view: curl with the profile's auth header
auth = platform.profile.auth_flags()
query = "active=true^priority=1^ORDERBYnumber"
cmd = f"curl -s {auth} '{url}/api/now/table/incident?sysparm_query={query}&sysparm_fields=number,short_description'"
out = subprocess.run(cmd, shell=True, capture_output=True, text=True).stdout
print("\nactive P1 incidents:")
for row in json.loads(out)["result"]:
    print(f"  {row['number']}  {row['short_description']}")

# without the header the platform answers with an HTML login redirect
html = subprocess.run(f"curl -s '{url}/api/now/table/incident'", shell=True, capture_output=True, text=True).stdout
print("\nwithout auth:", html[:60], "...")

# a malformed payload gets the platform's JSON error envelope
bad = platform.handle_request("POST", "/api/now/table/incident", trusted=True, body="{'short_description': 1}")
print("bad payload:", bad.status, bad.body)

created = platform.handle_request("POST", "/api/now/table/incident", trusted=True, body='{"short_description": "demo"}')
print("\ncreated", created.json()["result"]["number"])
print("digest changed:", platform.state_digest() != snapshot.digest)
platform.reset()
print("after reset, digest restored:", platform.state_digest() == snapshot.digest)
platform.shutdown()
