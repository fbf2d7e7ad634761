"""End-to-end checks of the httptpc command line: exit codes, serve
lifecycle, and report output."""

import json
import pathlib
import signal
import socket
import ssl
import subprocess
import sys
import tempfile
import time
import unittest
import urllib.request

BINARY = pathlib.Path(sys.argv.pop(1))
EXAMPLE_CONFIG = pathlib.Path(sys.argv.pop(1))


def run(*args, timeout=120):
    return subprocess.run([str(BINARY), *args], capture_output=True, text=True, timeout=timeout)


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def fetch(url):
    ctx = ssl.create_default_context()
    ctx.check_hostname = False
    ctx.verify_mode = ssl.CERT_NONE
    with urllib.request.urlopen(url, context=ctx, timeout=5) as r:
        return r.status, r.read()


class Serve:
    def __init__(self, config_path):
        self.proc = subprocess.Popen([str(BINARY), "--config", str(config_path), "serve"],
                                     stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)

    def wait_listening(self, timeout=2.0):
        line = self.proc.stdout.readline()
        return line.strip()

    def stop(self):
        self.proc.send_signal(signal.SIGTERM)
        return self.proc.wait(timeout=10)


class CliTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = pathlib.Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def config(self, **overrides):
        doc = json.loads(EXAMPLE_CONFIG.read_text())
        doc["listen_port"] = free_port()
        for key, value in overrides.items():
            if isinstance(value, dict):
                doc.setdefault(key, {}).update(value)
            else:
                doc[key] = value
        path = self.dir / f"endpoint-{doc['listen_port']}.json"
        path.write_text(json.dumps(doc))
        return path, doc["listen_port"]

    def test_usage_errors_exit_2(self):
        self.assertEqual(run().returncode, 2)
        self.assertEqual(run("no-such-command").returncode, 2)
        self.assertEqual(run("serve").returncode, 2)
        self.assertEqual(run("matrix", "--endpoints", "0").returncode, 2)
        self.assertEqual(run("--help").returncode, 0)

    def test_invalid_config_names_field_before_binding(self):
        path, port = self.config(pull_streams=0)
        t0 = time.monotonic()
        r = run("--config", str(path), "serve", timeout=10)
        self.assertEqual(r.returncode, 2)
        self.assertIn("pull_streams", r.stderr)
        self.assertLess(time.monotonic() - t0, 5)
        with socket.socket() as s:
            s.bind(("127.0.0.1", port))  # nothing was bound

    def test_serve_liveness_conflict_and_signal_shutdown(self):
        path, port = self.config()
        server = Serve(path)
        try:
            t0 = time.monotonic()
            line = server.wait_listening()
            self.assertEqual(line, f"listening on https://127.0.0.1:{port}")
            status, body = fetch(f"https://127.0.0.1:{port}/.well-known/oauth-authorization-server")
            self.assertLess(time.monotonic() - t0, 2.0)
            self.assertEqual(status, 200)
            self.assertEqual(json.loads(body)["token_endpoint"], f"https://127.0.0.1:{port}/token")

            clash = run("--config", str(path), "serve", timeout=10)
            self.assertEqual(clash.returncode, 1)
            self.assertIn("Address already in use", clash.stderr)

            smoke = run("--insecure-tls", "--json", str(self.dir / "smoke.json"), "smoke", "--endpoint",
                        f"https://127.0.0.1:{port}", "--client-secret", "harness-secret")
            self.assertEqual(smoke.returncode, 0, smoke.stdout + smoke.stderr)
            report = json.loads((self.dir / "smoke.json").read_text())
            self.assertTrue(report["passed"])
            self.assertEqual(len(report["steps"]), 11)
        finally:
            self.assertEqual(server.stop(), 0)

    def test_smoke_against_dark_token_service_fails(self):
        path, port = self.config(token_service={"enabled": False})
        server = Serve(path)
        try:
            server.wait_listening()
            r = run("--insecure-tls", "--json", "-", "smoke", "--endpoint", f"https://127.0.0.1:{port}")
            self.assertEqual(r.returncode, 1)
            steps = {s["name"]: s["status"] for s in json.loads(r.stdout)["steps"]}
            self.assertEqual(steps["token:UPLOAD"], "FAIL")
            self.assertEqual(steps["pull-copy"], "SKIPPED")
        finally:
            server.stop()

    def test_in_process_commands(self):
        r = run("smoke")
        self.assertEqual(r.returncode, 0, r.stdout + r.stderr)
        r = run("--json", "-", "matrix", "--file-size", "65536")
        self.assertEqual(r.returncode, 0)
        self.assertEqual(json.loads(r.stdout)["summary"], {"cells": 12, "succeeded": 12, "failed": 0})
        r = run("matrix", "--endpoints", "1")
        self.assertEqual(r.returncode, 0)
        r = run("--json", "-", "scale-drill", "--endpoints", "3", "--files", "3", "--file-size", "50000",
                "--cycles", "1")
        self.assertEqual(r.returncode, 0)
        self.assertEqual(json.loads(r.stdout)["totals"]["bytes_moved"], 3 * 2 * 50000)

    def test_mesh_config_file(self):
        mesh = self.dir / "mesh.json"
        mesh.write_text(json.dumps({"endpoints": [{}, {"copy_enabled": False}],
                                    "dataset": {"file_count": 1, "file_size_bytes": 1000}}))
        r = run("--config", str(mesh), "--json", "-", "matrix")
        self.assertEqual(r.returncode, 1)
        cells = json.loads(r.stdout)["cells"]
        outcomes = {(c["source"], c["destination"], c["mode"]): c["outcome"] for c in cells}
        self.assertEqual(outcomes, {(0, 1, "PULL"): "FAILED", (0, 1, "PUSH"): "SUCCEEDED",
                                    (1, 0, "PULL"): "SUCCEEDED", (1, 0, "PUSH"): "FAILED"})
        mesh.write_text(json.dumps({"endpoints": [{"pull_streams": 0}]}))
        r = run("--config", str(mesh), "matrix")
        self.assertEqual(r.returncode, 2)
        self.assertIn("endpoints[0]", r.stderr)

    def test_token_tools(self):
        mint = run("token", "mint", "--key", "k", "--scope", "DOWNLOAD:/data", "--now", "1000")
        self.assertEqual(mint.returncode, 0)
        token = mint.stdout.strip()
        ok = run("token", "verify", "--key", "k", "--token", token, "--scope", "DOWNLOAD:/data/a", "--now", "1001")
        self.assertEqual((ok.returncode, ok.stdout.strip()), (0, "PASS"))
        expired = run("token", "verify", "--key", "k", "--token", token, "--scope", "DOWNLOAD:/data",
                      "--now", str(1000 + 3600))
        self.assertEqual(expired.returncode, 1)
        self.assertIn("EXPIRED", expired.stdout)
        narrowed = run("token", "attenuate", "--token", token, "--scope", "DOWNLOAD:/data/run1").stdout.strip()
        denied = run("token", "verify", "--key", "k", "--token", narrowed, "--scope", "DOWNLOAD:/data/run2",
                     "--now", "1001")
        self.assertEqual(denied.returncode, 1)
        inspect = json.loads(run("token", "inspect", "--token", narrowed).stdout)
        self.assertEqual(inspect["caveats"][-1], "scope:DOWNLOAD:/data/run1")
        self.assertEqual(run("token", "inspect", "--token", "garbage").returncode, 2)
        self.assertEqual(run("token", "mint", "--key", "k", "--scope", "download:/x").returncode, 2)


if __name__ == "__main__":
    unittest.main(verbosity=2)
