import pytest

from minidml.dsl import LIBRARY, LIBRARY_PATHS, parse, resolve_imports
from minidml.dsl.builtins import LibraryNamespace
from minidml.errors import ImportResolutionError


def test_library_paths_bind_to_namespaces():
    prog = parse('source("nn/layers/affine.dml") as affine\nsource("nn/optim/adam.dml") as opt')
    r = resolve_imports(prog)
    assert isinstance(r.namespaces["affine"], LibraryNamespace)
    assert {"init", "forward", "backward"} <= set(r.namespaces["affine"].functions)
    assert {"init", "update"} <= set(r.namespaces["opt"].functions)


def test_library_covers_every_layer_and_optimizer():
    names = {p.rsplit("/", 1)[1][:-4] for p in LIBRARY}
    assert {"affine", "conv2d", "max_pool2d", "relu", "sigmoid", "tanh", "softmax", "dropout",
            "cross_entropy_loss", "sgd", "sgd_momentum", "sgd_nesterov", "adagrad", "rmsprop", "adam"} <= names
    assert LIBRARY_PATHS["affine"] == "nn/layers/affine.dml"


def test_two_file_user_import(tmp_path):
    (tmp_path / "lib").mkdir()
    (tmp_path / "lib" / "util.dml").write_text("double_it = function(double x) return (double y) { y = 2 * x }\n")
    main = tmp_path / "main.dml"
    main.write_text('source("lib/util.dml") as util\nz = util::double_it(21)\n')
    from minidml.dsl import interpret
    env = interpret(parse(main.read_text()), path=main)
    assert env["z"] == 42.0


def test_self_import_is_a_cycle(tmp_path):
    p = tmp_path / "self.dml"
    p.write_text('source("self.dml") as me\nx = 1\n')
    with pytest.raises(ImportResolutionError, match="cycle"):
        resolve_imports(parse(p.read_text()), path=p)


def test_mutual_import_cycle(tmp_path):
    (tmp_path / "a.dml").write_text('source("b.dml") as b\n')
    (tmp_path / "b.dml").write_text('source("a.dml") as a\n')
    with pytest.raises(ImportResolutionError, match="cycle through 'a.dml'"):
        resolve_imports(parse((tmp_path / "a.dml").read_text()), path=tmp_path / "a.dml")


def test_registry_cycle_and_text_entries():
    reg = {"m1": 'source("m2") as m2\n', "m2": 'source("m1") as m1\n'}
    with pytest.raises(ImportResolutionError, match="cycle"):
        resolve_imports(parse('source("m1") as m1'), reg)
    r = resolve_imports(parse('source("helpers") as h'), {"helpers": "f = function() {}\n"})
    assert "f" in r.namespaces["h"].functions


def test_unresolvable_and_duplicate_alias():
    with pytest.raises(ImportResolutionError, match="line 2: cannot resolve import 'nope.dml'"):
        resolve_imports(parse('x = 1\nsource("nope.dml") as n'))
    with pytest.raises(ImportResolutionError, match="imported twice"):
        resolve_imports(parse('source("nn/optim/sgd.dml") as s\nsource("nn/optim/adam.dml") as s'))


def test_syntax_error_in_imported_file(tmp_path):
    (tmp_path / "bad.dml").write_text("x = (\n")
    with pytest.raises(ImportResolutionError, match="in bad.dml"):
        resolve_imports(parse('source("bad.dml") as b'), path=tmp_path / "main.dml")
