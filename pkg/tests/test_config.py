import pytest

from qmigtax.config import BUILTIN_ENDPOINTS, RunConfig, discover_config, load_config
from qmigtax.errors import ConfigError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults():
    cfg = RunConfig()
    assert cfg.threshold == 0.5 and cfg.parallelism == 4 and cfg.default_language == "en"
    assert cfg.endpoint("mock").is_mock
    assert {ep.name for ep in BUILTIN_ENDPOINTS} >= {"mock", "gpt-4o", "gpt-4o-mini", "deepseek-v3", "deepseek-r1"}


def test_load(tmp_path):
    p = write(
        tmp_path / "q.conf",
        "[qmigtax]\ncorpus_dir = data/corpus\nthreshold = 0.6\nparallelism = 2\ndefault_language = es\n\n"
        "[endpoint local]\nbase_url = http://localhost:1234/v1\ncontext_window = 8192\ntemperature = 0.2\n"
        "response_dir = canned\n",
    )
    cfg = load_config(p)
    assert cfg.corpus_dir == tmp_path / "data" / "corpus"
    assert (cfg.threshold, cfg.parallelism, cfg.default_language) == (0.6, 2, "es")
    ep = cfg.endpoint("local")
    assert (ep.context_window, ep.temperature, ep.response_dir) == (8192, 0.2, str(tmp_path / "canned"))
    assert cfg.endpoint("gpt-4o").auth_env_var == "OPENAI_API_KEY"


def test_override_builtin(tmp_path):
    p = write(tmp_path / "q.conf", "[endpoint gpt-4o]\nbase_url = http://proxy/v1\ncontext_window = 1000\n")
    assert load_config(p).endpoint("gpt-4o").base_url == "http://proxy/v1"


@pytest.mark.parametrize(
    "text",
    [
        "[qmigtax]\nthreshold = 0\n",
        "[qmigtax]\nthreshold = lots\n",
        "[qmigtax]\nparallelism = 0\n",
        "[qmigtax]\ndefault_language = fr\n",
        "[endpoint x]\ncontext_window = 10\n",
        "[endpoint x]\nbase_url = mock://\ncontext_window = -5\n",
        "not an ini file",
    ],
)
def test_invalid(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path / "q.conf", text))


def test_unknown_endpoint():
    with pytest.raises(ConfigError):
        RunConfig().endpoint("nope")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.conf")


def test_discovery(tmp_path):
    assert discover_config(cwd=tmp_path).threshold == 0.5
    write(tmp_path / "qmigtax.conf", "[qmigtax]\nthreshold = 0.7\n")
    assert discover_config(cwd=tmp_path).threshold == 0.7
    other = write(tmp_path / "other.conf", "[qmigtax]\nthreshold = 0.9\n")
    assert discover_config(str(other), cwd=tmp_path).threshold == 0.9
