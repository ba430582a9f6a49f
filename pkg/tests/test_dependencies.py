"""
依赖检查测试
"""

from src import dependencies
from src.dependencies import safe_import, missing_packages, progress


def test_safe_import():
    module, ok = safe_import('json')
    assert ok and module.dumps([1]) == '[1]'
    assert safe_import('no_such_module_for_microflow') == (None, False)


def test_missing_packages(mocker):
    assert missing_packages() == []
    real = dependencies.safe_import
    mocker.patch.object(dependencies, 'safe_import',
                        side_effect=lambda name: (None, False) if name == 'yaml' else real(name))
    assert missing_packages() == ['PyYAML']


def test_progress_passthrough():
    items = [1, 2, 3]
    assert progress(items, enabled=False) is items
    assert list(progress(items, desc='x', total=3)) == items
