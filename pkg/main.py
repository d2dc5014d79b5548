import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent / "src"))

from cli.main import main  # noqa: E402  pylint: disable=wrong-import-position

if __name__ == "__main__":
    sys.exit(main())
