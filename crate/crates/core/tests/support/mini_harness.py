"""Minimal wire-protocol harness used only by the executor tests."""
import contextlib
import io
import json
import sys


def main():
    job = json.load(sys.stdin)
    report = {"status": "ok", "results": [], "error": ""}
    sink = io.StringIO()
    try:
        compiled = compile(job["code"], "<candidate>", "exec")
    except SyntaxError as e:
        report.update(status="syntax_error", error=str(e))
        print(json.dumps(report))
        return
    env = {}
    try:
        with contextlib.redirect_stdout(sink):
            exec(compiled, env)
    except BaseException as e:
        report.update(status="load_error", error=repr(e))
        print(json.dumps(report))
        return
    for test in job["tests"]:
        try:
            with contextlib.redirect_stdout(sink):
                exec(test, dict(env))
            report["results"].append(True)
        except BaseException:
            report["results"].append(False)
    print(json.dumps(report))


if __name__ == "__main__":
    main()
