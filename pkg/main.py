#!/usr/bin/env python3
"""
微出行 OD 需求预测软件 - 主启动脚本

提供统一的命令行入口：每个流水线阶段一个子命令，另有 run-all、report、status。
"""

import sys
import argparse
from pathlib import Path


def setup_environment():
    """设置运行环境"""
    project_root = Path(__file__).resolve().parent

    # 以包形式导入 src，保证各模块的相对导入一致
    if str(project_root) not in sys.path:
        sys.path.insert(0, str(project_root))

    return project_root


def check_dependencies():
    """检查依赖库"""
    from src.dependencies import missing_packages

    missing = missing_packages()
    if missing:
        print(f"错误: 缺少依赖库: {', '.join(missing)}", file=sys.stderr)
        print("请运行: pip install -r requirements.txt", file=sys.stderr)
        return False
    return True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="微出行 OD 需求预测软件",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
使用示例:
  python main.py run-all                              # 合成城市上跑完整流水线
  python main.py --config config.yaml features        # 只运行特征阶段
  python main.py --seed 7 --jobs 4 --force run-all    # 覆盖种子与并行数并强制重跑
  python main.py report                               # 打印已有报告
        """
    )
    parser.add_argument('--config', help='YAML 配置文件路径（缺省使用内置默认配置）')
    parser.add_argument('--seed', type=int, help='根随机种子（覆盖 run.seed 与 synth.seed）')
    parser.add_argument('--jobs', type=int, help='并行工作数上限')
    parser.add_argument('--force', action='store_true', help='忽略阶段清单，强制重跑')
    parser.add_argument('--output-dir', help='输出目录（覆盖 base.output_dir）')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='日志级别')

    subparsers = parser.add_subparsers(dest='command', required=True, help='可用子命令')
    for name, help_text in [
        ('synth', '生成合成城市数据'),
        ('ingest', '解析并清洗行程'),
        ('features', '构建特征矩阵'),
        ('train', '训练模型网格'),
        ('evaluate', '在测试集上评估已训练模型'),
        ('ablate', '特征组消融'),
        ('explain', 'SHAP 特征重要性'),
        ('run-all', '依次运行全部阶段'),
        ('report', '打印已有报告'),
        ('status', '显示各阶段状态'),
    ]:
        subparsers.add_parser(name, help=help_text)
    return parser


def load_settings(args):
    """加载配置并应用命令行覆盖"""
    from src.config_manager import ConfigManager

    config = ConfigManager(args.config)
    if args.seed is not None:
        config.update_config('run.seed', args.seed)
        config.update_config('synth.seed', args.seed)
    if args.jobs is not None:
        config.update_config('run.jobs', args.jobs)
    if args.log_level:
        config.update_config('log.level', args.log_level)
    if args.output_dir:
        config.update_config('base.output_dir', args.output_dir)
    # 用户显式配置了输入文件时，启动前检查文件存在
    config.require_valid(check_paths=bool(config.get_config('paths.trips')) and args.command != 'synth')
    return config


def main(argv=None):
    """主入口函数"""
    args = build_parser().parse_args(argv)

    # 设置环境
    setup_environment()

    # 检查依赖
    if not check_dependencies():
        return 1

    from src.exceptions import MicroflowException
    from src.log_manager import log_manager
    from src.pipeline_runner import PipelineRunner

    try:
        config = load_settings(args)
        output_dir = Path(config.get_config('base.output_dir'))
        log_manager.configure(log_dir=str(output_dir / 'logs'),
                              log_level=config.get_config('log.level', 'INFO'),
                              console_output=config.get_config('log.console_output', True),
                              max_file_size=config.get_config('log.max_file_size'),
                              backup_count=config.get_config('log.backup_count'))
        runner = PipelineRunner(config, force=args.force)

        if args.command == 'report':
            print(runner.report_text())
            return 0
        if args.command == 'status':
            for stage, status in runner.status().items():
                print(f"  {stage:<10} {status}")
            return 0
        return getattr(runner, 'cmd_' + args.command.replace('-', '_'))()
    except MicroflowException as e:
        print(f"错误: {e}", file=sys.stderr)
        for line in e.details.get('errors', []):
            print(f"   - {line}", file=sys.stderr)
        return 2
    finally:
        log_manager.close()


if __name__ == "__main__":
    try:
        exit_code = main()
        sys.exit(exit_code)
    except KeyboardInterrupt:
        print("\n用户中断，程序退出")
        sys.exit(130)
    except Exception as e:
        print(f"程序异常退出: {e}", file=sys.stderr)
        sys.exit(1)
