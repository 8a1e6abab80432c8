# make_text_fixture.py
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
# Builds tests/data/english_docstrings.txt: plain English prose paragraphs
# harvested from docstrings of the installed Python stdlib and scientific
# packages. Output is one paragraph per line, deduplicated, in file order.
#
#   python3 tools/make_text_fixture.py [out_path]

import ast
import glob
import re
import sys

STDLIB = "/usr/lib/python3.10"
SITE = "/usr/local/lib/python3.10/dist-packages"
PACKAGES = ["numpy", "scipy", "sklearn", "pandas", "statsmodels"]

PROSE = re.compile(r"[A-Za-z0-9 ,.;:'\"()!?\-]+")
WORD = re.compile(r"[A-Za-z'.,;:()\"!?-]+")


def source_files():
    files = sorted(glob.glob(STDLIB + "/*.py") + glob.glob(STDLIB + "/*/*.py"))
    for pkg in PACKAGES:
        files += sorted(glob.glob(f"{SITE}/{pkg}/**/*.py", recursive=True))
    return [f for f in files if not any(s in f for s in ("/test", "idle", "lib2to3"))]


def paragraphs(path):
    try:
        with open(path, encoding="utf-8") as fh:
            tree = ast.parse(fh.read())
    except (OSError, SyntaxError, UnicodeDecodeError, ValueError):
        return
    kinds = (ast.Module, ast.FunctionDef, ast.ClassDef, ast.AsyncFunctionDef)
    for node in ast.walk(tree):
        if not isinstance(node, kinds):
            continue
        doc = ast.get_docstring(node)
        if not doc:
            continue
        for para in re.split(r"\n\s*\n", doc):
            lines = [l.strip() for l in para.splitlines()]
            # Skip doctests, lists and tables.
            if any(l.startswith((">>>", "...", "-", "*", ":", "|")) for l in lines):
                continue
            text = " ".join(lines)
            if len(text) < 60 or not PROSE.fullmatch(text):
                continue
            words = text.split()
            if sum(1 for w in words if WORD.fullmatch(w)) / len(words) < 0.9:
                continue
            yield text


def main():
    out_path = sys.argv[1] if len(sys.argv) > 1 else "tests/data/english_docstrings.txt"
    seen = set()
    kept = []
    for f in source_files():
        for text in paragraphs(f):
            if text not in seen:
                seen.add(text)
                kept.append(text)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(kept) + "\n")
    print(f"{out_path}: {len(kept)} paragraphs")


if __name__ == "__main__":
    main()
