# Generated by Django 5.2.5 on 2026-10-17 09:00

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('system_name', models.CharField(max_length=20)),
                ('seed', models.BigIntegerField()),
                ('path_count', models.PositiveIntegerField()),
                ('workers', models.PositiveIntegerField(default=1)),
                ('strict', models.BooleanField(default=False)),
                ('status', models.CharField(choices=[('success', 'Success'), ('diverged', 'Diverged'), ('hypothesis_failed', 'Hypothesis failed'), ('failed', 'Failed')], max_length=20)),
                ('ms_slope', models.FloatField(blank=True, null=True)),
                ('divergence_count', models.PositiveIntegerField(default=0)),
                ('out_dir', models.CharField(max_length=255)),
                ('message', models.TextField(blank=True)),
                ('config', models.JSONField(default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
