"""
日志管理测试
"""

from src.log_manager import LogManager


def test_no_files_before_configure(tmp_path):
    manager = LogManager()
    manager.get_logger('unit_lazy').info('只到控制台')
    assert manager.get_log_files() == []
    assert list(tmp_path.iterdir()) == []


def test_file_output_with_context(tmp_path):
    manager = LogManager()
    logger = manager.get_logger('unit_ctx')
    manager.configure(log_dir=str(tmp_path), console_output=False)
    logger.info('阶段开始', task_id='features', rows=3)
    assert manager.get_log_files() == [tmp_path / 'unit_ctx.log']
    manager.close()
    text = (tmp_path / 'unit_ctx.log').read_text(encoding='utf-8')
    assert '[features] 阶段开始 [rows=3]' in text
    assert 'microflow.unit_ctx - INFO' in text
    assert manager.get_log_files() == []


def test_level_filters(tmp_path):
    manager = LogManager()
    logger = manager.get_logger('unit_level')
    manager.configure(log_dir=str(tmp_path), log_level='WARNING', console_output=False)
    try:
        logger.info('hidden')
        logger.warning('shown')
    finally:
        manager.close()
        manager.set_log_level('INFO')
    text = (tmp_path / 'unit_level.log').read_text(encoding='utf-8')
    assert 'shown' in text and 'hidden' not in text


def test_level_context_kwarg(tmp_path):
    manager = LogManager()
    logger = manager.get_logger('unit_level_kw')
    manager.configure(log_dir=str(tmp_path), console_output=False)
    try:
        logger.info('聚合完成', level='quarters', scale='daily')
        logger.warning('没有出行', task_id='ingest', level='grid')
    finally:
        manager.close()
    text = (tmp_path / 'unit_level_kw.log').read_text(encoding='utf-8')
    assert '聚合完成 [level=quarters, scale=daily]' in text
    assert '[ingest] 没有出行 [level=grid]' in text
